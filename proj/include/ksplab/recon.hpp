#pragma once

#include "losses.hpp"
#include "phantom.hpp"
#include "sampling.hpp"

#include <limits>
#include <stdexcept>

namespace ksplab {

enum class ReconMethod { zero_filled, gd };

inline char const* to_string(ReconMethod m) { return m == ReconMethod::zero_filled ? "zero-filled" : "gd"; }

inline ReconMethod parse_recon_method(std::string const& s)
{
  if (s == "zero-filled" || s == "zero_filled" || s == "zf") return ReconMethod::zero_filled;
  if (s == "gd") return ReconMethod::gd;
  throw std::invalid_argument("unknown recon method '" + s + "'");
}

struct ReconConfig
{
  ReconMethod method = ReconMethod::gd;
  std::size_t iterations = 200;
  double step = 1.0;
  LossConfig loss{};
  /// Adds the SSIM / Eagle / perceptual terms against a supplied ground truth.
  bool use_ground_truth_losses = false;
  /// Data-consistency projection period in iterations; 0 disables it.
  std::size_t dc_every = 0;
  /// Abort when the total loss exceeds this multiple of its initial value.
  double divergence_factor = 10.0;

  void validate() const
  {
    if (!(step > 0.0)) throw std::invalid_argument("ReconConfig: step must be positive");
    if (!(divergence_factor > 1.0)) throw std::invalid_argument("ReconConfig: divergence factor must exceed 1");
    loss.weights.validate();
  }
};

class ReconDivergence : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct IterationRecord
{
  std::size_t iteration = 0;
  LossReport report;
  /// ||(1 - M) . k_pred||_2 over all coils.
  double unsampled_norm = 0.0;
};

struct ReconResult
{
  ComplexImage x;
  RealImage image;
  std::vector<IterationRecord> trace;
  double step = 0.0;
};

/// Per-coil ifft2c followed by RSS.
inline RealImage zero_filled(MultiCoilKSpace const& masked_ksp) { return rss_magnitude(ifft2c_coils(masked_ksp)); }

/// Coil-combined zero-filled image, sum_c conj(S_c) ifft2c(y_c): the starting point of gd.
inline ComplexImage zero_filled_combined(MultiCoilKSpace const& masked_ksp, SensitivityMaps const& maps)
{
  return sense_combine(ifft2c_coils(masked_ksp), maps);
}

/// Replaces sampled entries of k_est with the measurements.
inline MultiCoilKSpace data_consistency(MultiCoilKSpace const& k_est, MultiCoilKSpace const& measured,
                                        SamplingMask const& mask)
{
  if (!k_est.same_shape(measured)) throw std::invalid_argument("data_consistency: shape mismatch");
  check_mask_shape(k_est, mask, "data_consistency");
  MultiCoilKSpace out = k_est;
  for (std::size_t c = 0; c < out.count(); ++c) {
    for (std::size_t r = 0; r < out.height(); ++r) {
      for (std::size_t x = 0; x < out.width(); ++x) {
        if (mask.sampled(r, x)) out(c, r, x) = measured(c, r, x);
      }
    }
  }
  return out;
}

inline double unsampled_norm(MultiCoilKSpace const& k, SamplingMask const& mask)
{
  double s = 0.0;
  for (std::size_t c = 0; c < k.count(); ++c) {
    for (std::size_t r = 0; r < k.height(); ++r) {
      for (std::size_t x = 0; x < k.width(); ++x) {
        if (!mask.sampled(r, x)) s += std::norm(k(c, r, x));
      }
    }
  }
  return std::sqrt(s);
}

namespace detail {

inline LossReport recon_objective(ComplexImage const& x, MultiCoilKSpace const& measured, SamplingMask const& mask,
                                  SensitivityMaps const& maps, ReconConfig const& cfg, RealImage const* truth,
                                  bool with_grad, MultiCoilKSpace* k_pred = nullptr)
{
  RealImage const* ref = cfg.use_ground_truth_losses ? truth : nullptr;
  return total_loss_wrt_image(x, maps, measured, ref, cfg.loss, &mask, with_grad, k_pred);
}

} // namespace detail

/// Fixed-step gradient descent on the complex image under k = fft2c(S_c x). Blind mode
/// fits the measurements with the regularizer; with use_ground_truth_losses the
/// image-domain terms against `truth` join the objective.
inline ReconResult gd_reconstruct(MultiCoilKSpace const& masked_ksp, SamplingMask const& mask,
                                  SensitivityMaps const& maps, ReconConfig const& cfg,
                                  RealImage const* truth = nullptr)
{
  cfg.validate();
  check_mask_shape(masked_ksp, mask, "gd_reconstruct");
  if (!masked_ksp.same_shape(maps)) throw std::invalid_argument("gd_reconstruct: maps do not match k-space");
  if (cfg.use_ground_truth_losses) {
    if (truth == nullptr) {
      throw std::invalid_argument("gd_reconstruct: ground-truth losses requested without a ground truth");
    }
    if (truth->height() != maps.height() || truth->width() != maps.width()) {
      throw std::invalid_argument("gd_reconstruct: ground truth shape mismatch");
    }
  }

  ReconResult res;
  res.step = cfg.step;
  res.x = zero_filled_combined(masked_ksp, maps);
  double initial = 0.0;
  MultiCoilKSpace k_pred;
  // One objective evaluation per iterate; the gradient at x_it drives the step to x_{it+1}.
  for (std::size_t it = 0;; ++it) {
    bool const last = it == cfg.iterations;
    LossReport rep = detail::recon_objective(res.x, masked_ksp, mask, maps, cfg, truth, !last, &k_pred);
    std::optional<ComplexImage> grad = std::move(rep.grad_image);
    rep.grad_image.reset();
    rep.grad_kspace.reset();
    double const now = rep.total;
    if (it == 0) initial = now;
    if (!std::isfinite(now) || (it > 0 && now > cfg.divergence_factor * initial)) {
      throw ReconDivergence("gd_reconstruct: diverged at iteration " + std::to_string(it) + " (total " +
                            std::to_string(now) + ", initial " + std::to_string(initial) + ", step " +
                            std::to_string(cfg.step) + ")");
    }
    res.trace.push_back(IterationRecord{it, std::move(rep), unsampled_norm(k_pred, mask)});
    if (last) break;

    auto const& g = *grad;
    for (std::size_t i = 0; i < res.x.size(); ++i) res.x[i] -= cfg.step * g[i];
    if (cfg.dc_every > 0 && (it + 1) % cfg.dc_every == 0) {
      MultiCoilKSpace const k = data_consistency(simulate_kspace(res.x, maps), masked_ksp, mask);
      res.x = sense_combine(ifft2c_coils(k), maps);
    }
  }
  res.image = rss_magnitude(sense_expand(res.x, maps));
  return res;
}

/// Blind-mode preset: fidelity to the measurements plus the regularizer at weight 1e-3.
/// Image-domain weights are kept but inactive without a ground truth.
inline ReconConfig blind_recon_config()
{
  ReconConfig cfg;
  cfg.loss.weights.reg = 1e-3;
  return cfg;
}

/// Largest stable step for the fidelity term alone: 1 / (2 alpha_1 f), f the reduction factor.
inline double fidelity_step_scale(MultiCoilKSpace const& ksp, ReconConfig const& cfg)
{
  double const f = cfg.loss.reduction == Reduction::mean ? 1.0 / double(ksp.size()) : 1.0;
  double const a = std::max(cfg.loss.weights.fidelity, 1e-12);
  return 1.0 / (2.0 * a * f);
}

/// Centre of the step-tuning grid. The image-domain terms are far stiffer than the
/// mean-reduced fidelity term, so oracle mode starts 2^12 below the fidelity scale.
inline double default_step_base(MultiCoilKSpace const& ksp, ReconConfig const& cfg)
{
  double const base = fidelity_step_scale(ksp, cfg);
  return cfg.use_ground_truth_losses ? std::ldexp(base, -12) : base;
}

struct StepProbe
{
  double step = 0.0;
  double final_total = 0.0;
  bool diverged = false;
};

struct StepTuning
{
  double best_step = 0.0;
  std::vector<StepProbe> probes;
};

/// Runs `candidates` step sizes base * 2^k, k = -(candidates/2) .. candidates/2 - 1,
/// and keeps the one with the lowest final total loss.
inline StepTuning tune_step(MultiCoilKSpace const& masked_ksp, SamplingMask const& mask, SensitivityMaps const& maps,
                            ReconConfig cfg, RealImage const* truth, double base, std::size_t candidates = 8)
{
  StepTuning out;
  double best = std::numeric_limits<double>::infinity();
  int const lo = -int(candidates / 2);
  for (std::size_t i = 0; i < candidates; ++i) {
    cfg.step = base * std::ldexp(1.0, lo + int(i));
    StepProbe p{cfg.step, 0.0, false};
    try {
      ReconResult const r = gd_reconstruct(masked_ksp, mask, maps, cfg, truth);
      p.final_total = r.trace.back().report.total;
    } catch (ReconDivergence const&) {
      p.diverged = true;
      p.final_total = std::numeric_limits<double>::infinity();
    }
    if (!p.diverged && p.final_total < best) {
      best = p.final_total;
      out.best_step = p.step;
    }
    out.probes.push_back(p);
  }
  if (out.best_step == 0.0) throw ReconDivergence("tune_step: every candidate step diverged");
  return out;
}

inline StepTuning tune_step(MultiCoilKSpace const& masked_ksp, SamplingMask const& mask, SensitivityMaps const& maps,
                            ReconConfig const& cfg, RealImage const* truth = nullptr)
{
  return tune_step(masked_ksp, mask, maps, cfg, truth, default_step_base(masked_ksp, cfg));
}

} // namespace ksplab
