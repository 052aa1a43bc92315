#include "support.hpp"

#include <gtest/gtest.h>

using namespace ksplab;
using ksplab::testing::max_abs_diff;

class FftSizes : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>>
{
};

TEST_P(FftSizes, MatchesDirectDft)
{
  auto const [h, w] = GetParam();
  ComplexImage const x = ksplab::testing::random_complex(h, w, h * 31 + w);
  EXPECT_LT(max_abs_diff(fft2c(x), ksplab::testing::naive_dft2c(x, -1)), 1e-10);
  EXPECT_LT(max_abs_diff(ifft2c(x), ksplab::testing::naive_dft2c(x, +1)), 1e-10);
}

TEST_P(FftSizes, RoundTripAndParseval)
{
  auto const [h, w] = GetParam();
  ComplexImage const x = ksplab::testing::random_complex(h, w, h * 7 + w);
  EXPECT_LE(max_abs_diff(ifft2c(fft2c(x)), x), 1e-10);
  EXPECT_LE(max_abs_diff(fft2c(ifft2c(x)), x), 1e-10);
  double const ex = energy(x);
  EXPECT_NEAR(energy(fft2c(x)), ex, 1e-10 * ex);
}

INSTANTIATE_TEST_SUITE_P(Shapes, FftSizes,
                         ::testing::Values(std::pair<std::size_t, std::size_t>{1, 1}, std::pair<std::size_t, std::size_t>{8, 8},
                                           std::pair<std::size_t, std::size_t>{5, 7}, std::pair<std::size_t, std::size_t>{12, 20},
                                           std::pair<std::size_t, std::size_t>{16, 9}, std::pair<std::size_t, std::size_t>{17, 3}));

TEST(Fft, DeltaAtCentreIsFlat)
{
  ComplexImage x(6, 10);
  x(3, 5) = 1.0;
  ComplexImage const k = fft2c(x);
  double const v = 1.0 / std::sqrt(60.0);
  for (auto const& z : k) EXPECT_NEAR(std::abs(z - cplx(v, 0.0)), 0.0, 1e-14);
}

TEST(Fft, ConstantLandsAtCentre)
{
  ComplexImage x(8, 6, cplx(2.0, 0.0));
  ComplexImage const k = fft2c(x);
  EXPECT_NEAR(k(4, 3).real(), 2.0 * std::sqrt(48.0), 1e-12);
  double off = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i != 4 * 6 + 3) off = std::max(off, std::abs(k[i]));
  }
  EXPECT_LT(off, 1e-12);
}

TEST(Fft, Linearity)
{
  auto const a = ksplab::testing::random_complex(9, 12, 1);
  auto const b = ksplab::testing::random_complex(9, 12, 2);
  ComplexImage s(9, 12);
  cplx const alpha(0.3, -1.2);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = alpha * a[i] + b[i];
  auto const fa = fft2c(a);
  auto const fb = fft2c(b);
  auto const fs = fft2c(s);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_LT(std::abs(fs[i] - (alpha * fa[i] + fb[i])), 1e-12);
}

TEST(Fft, EmptyImageRejected)
{
  EXPECT_THROW(fft2c(ComplexImage(0, 4)), std::invalid_argument);
  EXPECT_THROW(ifft2c(ComplexImage(3, 0)), std::invalid_argument);
}

TEST(Fft, AdjointIdentity)
{
  // <F x, y> = <x, F^H y> with F^H = ifft2c.
  auto const x = ksplab::testing::random_complex(10, 14, 3);
  auto const y = ksplab::testing::random_complex(10, 14, 4);
  auto const fx = fft2c(x);
  auto const fhy = ifft2c(y);
  cplx lhs{}, rhs{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += fx[i] * std::conj(y[i]);
    rhs += x[i] * std::conj(fhy[i]);
  }
  EXPECT_LT(std::abs(lhs - rhs), 1e-10);
}
