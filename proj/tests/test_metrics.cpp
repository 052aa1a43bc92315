#include "support.hpp"

#include <gtest/gtest.h>

using namespace ksplab;
using ksplab::testing::random_image;

namespace {

// Box-smoothed copy with clamped borders.
RealImage smooth(RealImage const& x)
{
  RealImage out(x.height(), x.width());
  auto const h = std::ptrdiff_t(x.height());
  auto const w = std::ptrdiff_t(x.width());
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t i = -1; i <= 1; ++i) {
        for (std::ptrdiff_t j = -1; j <= 1; ++j) {
          s += x(std::size_t(std::clamp(r + i, std::ptrdiff_t{0}, h - 1)),
                 std::size_t(std::clamp(c + j, std::ptrdiff_t{0}, w - 1)));
        }
      }
      out(std::size_t(r), std::size_t(c)) = s / 9.0;
    }
  }
  return out;
}

double hf_nmse_oracle(RealImage const& img, RealImage const& ref, double cutoff, int order)
{
  ComplexImage const a = ksplab::testing::naive_dft2c(to_complex(img));
  ComplexImage const b = ksplab::testing::naive_dft2c(to_complex(ref));
  double num = 0.0, den = 0.0;
  for (std::size_t r = 0; r < a.height(); ++r) {
    for (std::size_t c = 0; c < a.width(); ++c) {
      double const fu = (double(r) - double(a.height() / 2)) / double(a.height());
      double const fv = (double(c) - double(a.width() / 2)) / double(a.width());
      double const d = std::hypot(fu, fv);
      double const h = d == 0.0 ? 0.0 : 1.0 / (1.0 + std::pow(cutoff / d, 2 * order));
      num += h * h * std::norm(a(r, c) - b(r, c));
      den += h * h * std::norm(b(r, c));
    }
  }
  return num / den;
}

} // namespace

TEST(Psnr, IdenticalIsInfinite)
{
  RealImage const x = random_image(8, 8, 1);
  EXPECT_EQ(psnr(x, x), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(psnr(x, x)));
}

TEST(Psnr, FortyDecibelsAtKnownMse)
{
  RealImage ref(10, 10, 0.5);
  ref(0, 0) = 1.0;
  RealImage img = ref;
  for (std::size_t i = 0; i < img.size(); ++i) img[i] += (i % 2 == 0) ? 0.01 : -0.01;
  EXPECT_NEAR(psnr(img, ref), 40.0, 1e-10);
}

TEST(Psnr, ScalarOracle)
{
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RealImage const x = random_image(9, 13, seed);
    RealImage const y = random_image(9, 13, seed + 20);
    double mse = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mse += (x[i] - y[i]) * (x[i] - y[i]);
      mx = std::max(mx, y[i]);
    }
    mse /= double(x.size());
    EXPECT_NEAR(psnr(x, y), 10.0 * std::log10(mx * mx / mse), 1e-10);
    EXPECT_NEAR(psnr(x, y, 2.0), 10.0 * std::log10(4.0 / mse), 1e-10);
  }
}

TEST(Psnr, MonotoneInNoise)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RealImage const ref = random_image(16, 16, seed);
    RealImage const noise = random_image(16, 16, seed + 1000, -1.0, 1.0);
    double prev = kPsnrIdentical;
    for (double level : {0.001, 0.01, 0.05, 0.1, 0.3}) {
      RealImage img = ref;
      for (std::size_t i = 0; i < img.size(); ++i) img[i] += level * noise[i];
      double const p = psnr(img, ref);
      EXPECT_LT(p, prev) << "seed " << seed << " level " << level;
      prev = p;
    }
  }
}

TEST(Psnr, RejectsBadInput)
{
  EXPECT_THROW(psnr(RealImage(3, 3), RealImage(3, 4, 1.0)), std::invalid_argument);
  EXPECT_THROW(psnr(RealImage(3, 3, 1.0), RealImage(3, 3)), std::invalid_argument);
}

TEST(Nmse, KnownValues)
{
  RealImage const ref = random_image(7, 9, 3, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(nmse(RealImage(7, 9), ref), 1.0);
  RealImage twice = ref;
  for (auto& v : twice) v *= 2.0;
  EXPECT_NEAR(nmse(twice, ref), 1.0, 1e-15);
  EXPECT_EQ(nmse(ref, ref), 0.0);
  EXPECT_THROW(nmse(ref, RealImage(7, 9)), std::invalid_argument);
}

TEST(Nmse, ScaleLaw)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RealImage const x = random_image(8, 8, seed);
    RealImage const y = random_image(8, 8, seed + 7);
    for (double s : {0.5, 3.0, 1e3}) {
      RealImage xs = x, ys = y;
      for (auto& v : xs) v *= s;
      for (auto& v : ys) v *= s;
      EXPECT_NEAR(nmse(xs, ys), nmse(x, y), 1e-12);
    }
  }
}

TEST(HfNmse, ConstantOffsetIsInvisible)
{
  RealImage const ref = random_image(16, 20, 4);
  EXPECT_NEAR(hf_nmse(ksplab::testing::random_image(16, 20, 4), ref), 0.0, 0.0);
  RealImage shifted = ref;
  for (auto& v : shifted) v += 0.3;
  EXPECT_NEAR(hf_nmse(shifted, ref), 0.0, 1e-24);
}

TEST(HfNmse, SmoothedReferenceOracle)
{
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RealImage const ref = random_image(12, 15, seed);
    RealImage const img = smooth(ref);
    double const v = hf_nmse(img, ref);
    EXPECT_NEAR(v, hf_nmse_oracle(img, ref, 0.25, 4), 1e-12);
    EXPECT_GT(v, 0.1);
  }
}

TEST(Ssim, SymmetricWithFixedRange)
{
  SsimOptions opt;
  opt.data_range = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RealImage const x = random_image(16, 16, seed);
    RealImage const y = random_image(16, 16, seed + 3);
    EXPECT_NEAR(ssim(x, y, opt), ssim(y, x, opt), 1e-14);
    EXPECT_NEAR(ssim(x, y, opt), 1.0 - ssim_loss(x, y, false, opt).value, 0.0);
  }
}

TEST(Ssim, IdentityIsOne)
{
  RealImage const x = random_image(12, 12, 9);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-15);
}
