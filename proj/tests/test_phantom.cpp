#include "support.hpp"

#include <gtest/gtest.h>

using namespace ksplab;

namespace {

PhantomSpec spec(std::size_t n, std::size_t coils, std::uint64_t seed = 0)
{
  PhantomSpec s;
  s.height = n;
  s.width = n;
  s.coils = coils;
  s.seed = seed;
  return s;
}

} // namespace

TEST(Phantom, Deterministic)
{
  for (auto kind : {PhantomKind::cardiac, PhantomKind::shepp_logan}) {
    PhantomSpec s = spec(48, 4, 11);
    s.kind = kind;
    s.frames = 2;
    Phantom const a = make_phantom(s);
    Phantom const b = make_phantom(s);
    ASSERT_EQ(a.frames.size(), 2u);
    for (std::size_t f = 0; f < 2; ++f) EXPECT_EQ(a.frames[f].values(), b.frames[f].values());
    EXPECT_EQ(a.maps.values(), b.maps.values());
    EXPECT_EQ(a.support.values(), b.support.values());
  }
}

TEST(Phantom, SeedChangesOutput)
{
  EXPECT_NE(make_phantom(spec(48, 4, 1)).frames[0].values(), make_phantom(spec(48, 4, 2)).frames[0].values());
}

TEST(Phantom, ValuesInUnitRange)
{
  Phantom const p = make_phantom(spec(64, 2));
  auto const [lo, hi] = std::minmax_element(p.frames[0].begin(), p.frames[0].end());
  EXPECT_GE(*lo, 0.0);
  EXPECT_LE(*hi, 1.0);
  EXPECT_GT(*hi, 0.0);
}

TEST(Phantom, DynamicFramesDifferSlightly)
{
  PhantomSpec s = spec(64, 2);
  s.frames = 2;
  Phantom const p = make_phantom(s);
  double diff = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < p.frames[0].size(); ++i) {
    diff += std::abs(p.frames[1][i] - p.frames[0][i]);
    mean += p.frames[0][i];
  }
  EXPECT_GT(diff, 0.0);
  EXPECT_LT(diff, 0.1 * mean);
}

TEST(Phantom, SingleCoilMapIsUnitInsideSupport)
{
  Phantom const p = make_phantom(spec(40, 1));
  std::size_t inside = 0;
  for (std::size_t r = 0; r < 40; ++r) {
    for (std::size_t c = 0; c < 40; ++c) {
      if (!p.support(r, c)) continue;
      ++inside;
      EXPECT_NEAR(std::abs(p.maps(0, r, c)), 1.0, 1e-12);
    }
  }
  EXPECT_GT(inside, 100u);
}

TEST(Phantom, MapsHaveUnitRss)
{
  Phantom const p = make_phantom(spec(32, 8, 5));
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < 8; ++k) s += std::norm(p.maps(k, r, c));
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Simulate, ParsevalAndRssRecovery)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Phantom const p = make_phantom(spec(36, 6, seed));
    MultiCoilKSpace const k = simulate_kspace(p.frames[0], p.maps);
    double ek = 0.0, ei = 0.0;
    for (auto const& z : k.values()) ek += std::norm(z);
    for (double v : p.frames[0]) ei += v * v;
    EXPECT_NEAR(ek, ei, 1e-10 * ei);
    RealImage const back = rss_magnitude(ifft2c_coils(k));
    EXPECT_LT(ksplab::testing::max_abs_diff(back, p.frames[0]), 1e-8);
  }
}

TEST(Phantom, RejectsEmptySpec)
{
  EXPECT_THROW(make_phantom(spec(0, 1)), std::invalid_argument);
  EXPECT_THROW(make_phantom(spec(8, 0)), std::invalid_argument);
  PhantomSpec s = spec(8, 1);
  s.frames = 0;
  EXPECT_THROW(make_phantom(s), std::invalid_argument);
  EXPECT_THROW(parse_phantom_kind("brain"), std::invalid_argument);
}
