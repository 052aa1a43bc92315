#include "support.hpp"

#include <gtest/gtest.h>

using namespace ksplab;
using ksplab::testing::make_scene;

namespace {

ReconConfig blind(MultiCoilKSpace const& y, std::size_t iterations, double scale = 0.5)
{
  ReconConfig cfg = blind_recon_config();
  cfg.iterations = iterations;
  cfg.step = scale * fidelity_step_scale(y, cfg);
  return cfg;
}

} // namespace

TEST(ZeroFilled, ZeroKspaceGivesZeroImage)
{
  MultiCoilKSpace const y(4, 16, 16);
  RealImage const img = zero_filled(y);
  for (double v : img) EXPECT_EQ(v, 0.0);
  SamplingMask const mask = make_uniform_mask(16, 16, 4, 4);
  Phantom const p = make_phantom({16, 16, 4, 0, PhantomKind::cardiac, 1});
  ReconResult const r = gd_reconstruct(y, mask, p.maps, blind(y, 5));
  for (double v : r.image) EXPECT_EQ(v, 0.0);
}

TEST(ZeroFilled, FullySampledIsNearPerfect)
{
  auto const s = make_scene(64, 1);
  RealImage const img = zero_filled(s.measured);
  RealImage const& gt = s.phantom.frames[0];
  EXPECT_GE(ssim(img, gt), 0.999);
  EXPECT_LE(nmse(img, gt), 1e-6);
}

TEST(ZeroFilled, UndersamplingLowersSsim)
{
  auto const full = make_scene(64, 1);
  auto const eight = make_scene(64, 8);
  RealImage const& gt = full.phantom.frames[0];
  EXPECT_LT(ssim(zero_filled(eight.measured), gt), ssim(zero_filled(full.measured), gt));
}

TEST(DataConsistency, RestrictionAndIdempotence)
{
  auto const s = make_scene(32, 4, 0, 3);
  MultiCoilKSpace const est = ksplab::testing::random_stack(3, 32, 32, 9);
  MultiCoilKSpace const once = data_consistency(est, s.measured, s.mask);
  MultiCoilKSpace const twice = data_consistency(once, s.measured, s.mask);
  EXPECT_EQ(once.values(), twice.values());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < 32; ++r) {
      for (std::size_t x = 0; x < 32; ++x) {
        cplx const expect = s.mask.sampled(r, x) ? s.measured(c, r, x) : est(c, r, x);
        EXPECT_EQ(std::bit_cast<std::uint64_t>(once(c, r, x).real()), std::bit_cast<std::uint64_t>(expect.real()));
        EXPECT_EQ(std::bit_cast<std::uint64_t>(once(c, r, x).imag()), std::bit_cast<std::uint64_t>(expect.imag()));
      }
    }
  }
  EXPECT_EQ(data_consistency(s.measured, s.measured, s.mask).values(), s.measured.values());
  EXPECT_THROW(data_consistency(est, MultiCoilKSpace(2, 32, 32), s.mask), std::invalid_argument);
}

TEST(Gd, ZeroIterationsReturnsInitialization)
{
  auto const s = make_scene(32, 4, 0, 4);
  ReconResult const r = gd_reconstruct(s.measured, s.mask, s.phantom.maps, blind(s.measured, 0));
  ComplexImage const init = zero_filled_combined(s.measured, s.phantom.maps);
  EXPECT_EQ(r.x.values(), init.values());
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].iteration, 0u);
}

TEST(Gd, TotalDoesNotIncrease)
{
  auto const s = make_scene(48, 8, 0, 6);
  ReconConfig const cfg = blind(s.measured, 40);
  ReconResult const r = gd_reconstruct(s.measured, s.mask, s.phantom.maps, cfg);
  ASSERT_EQ(r.trace.size(), 41u);
  EXPECT_LE(r.trace.back().report.total, r.trace.front().report.total);
}

TEST(Gd, DivergenceGuard)
{
  auto const s = make_scene(32, 4, 0, 4);
  ReconConfig cfg = blind(s.measured, 20, 64.0);
  EXPECT_THROW(gd_reconstruct(s.measured, s.mask, s.phantom.maps, cfg), ReconDivergence);
  cfg.divergence_factor = 1.0;
  EXPECT_THROW(gd_reconstruct(s.measured, s.mask, s.phantom.maps, cfg), std::invalid_argument);
}

TEST(Gd, TraceUnsampledNormMatchesRecomputation)
{
  auto const s = make_scene(48, 8, 0, 6);
  ReconConfig cfg = blind(s.measured, 12);
  cfg.dc_every = 1;
  ReconResult const r = gd_reconstruct(s.measured, s.mask, s.phantom.maps, cfg);
  MultiCoilKSpace const k = simulate_kspace(r.x, s.phantom.maps);
  double acc = 0.0;
  for (std::size_t c = 0; c < k.count(); ++c) {
    for (std::size_t row = 0; row < 48; ++row) {
      for (std::size_t col = 0; col < 48; ++col) {
        if (s.mask.sampled(row, col)) continue;
        acc += std::norm(k(c, row, col));
      }
    }
  }
  EXPECT_NEAR(r.trace.back().unsampled_norm, std::sqrt(acc), 1e-12);
  EXPECT_GT(r.trace.back().unsampled_norm, 0.0);
}

TEST(Gd, RejectsBadArguments)
{
  auto const s = make_scene(32, 4, 0, 4);
  ReconConfig cfg = blind(s.measured, 1);
  cfg.use_ground_truth_losses = true;
  EXPECT_THROW(gd_reconstruct(s.measured, s.mask, s.phantom.maps, cfg), std::invalid_argument);
  cfg.use_ground_truth_losses = false;
  cfg.step = 0.0;
  EXPECT_THROW(gd_reconstruct(s.measured, s.mask, s.phantom.maps, cfg), std::invalid_argument);
  EXPECT_THROW(parse_recon_method("admm"), std::invalid_argument);
}

// Fixed phantom: 64x64, 10 coils, seed 0, uniform 8x with 16 ACS lines, estimated maps.
TEST(Gd, BlindBeatsZeroFilledAtEightfold)
{
  auto const s = make_scene(64, 8);
  RealImage const& gt = s.phantom.frames[0];
  SensitivityMaps const maps = estimate_sens_maps(s.measured, s.mask);
  double const zf = nmse(zero_filled(s.measured), gt);
  ReconResult const r = gd_reconstruct(s.measured, s.mask, maps, blind(s.measured, 200));
  double const gd = nmse(r.image, gt);
  EXPECT_NEAR(zf, 0.01433, 5e-5);
  EXPECT_NEAR(gd, 0.01203, 5e-5);
  EXPECT_LT(gd, zf);
  EXPECT_LT(r.trace.back().report.total, r.trace.front().report.total);
}

TEST(TuneStep, PicksFiniteCandidate)
{
  auto const s = make_scene(32, 4, 0, 4);
  ReconConfig cfg = blind(s.measured, 10);
  StepTuning const t = tune_step(s.measured, s.mask, s.phantom.maps, cfg);
  EXPECT_EQ(t.probes.size(), 8u);
  EXPECT_GT(t.best_step, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (auto const& p : t.probes) best = std::min(best, p.final_total);
  for (auto const& p : t.probes) {
    if (p.step == t.best_step) {
      EXPECT_EQ(p.final_total, best);
    }
  }
}
