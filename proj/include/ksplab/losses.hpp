#pragma once

// Composite reconstruction objective: k-space fidelity, SSIM, the Eagle high-frequency
// loss, a perceptual feature loss and an L1+L2 k-space regularizer, each with an
// analytic gradient.
//
// Gradients with respect to complex arrays use the real parameterization: the entry
// for z is dL/d(Re z) + i dL/d(Im z).

#include "coils.hpp"
#include "filters.hpp"
#include "perceptual.hpp"
#include "sampling.hpp"
#include "ssim.hpp"

#include <optional>

namespace ksplab {

/// How norms are reduced. `mean` divides by the element count so magnitudes do not
/// depend on resolution; `sum` gives the raw norms.
enum class Reduction { mean, sum };

struct LossWeights
{
  double fidelity = 1.0;
  double ssim = 1.0;
  double eagle = 0.05;
  double vgg = 0.1;
  double reg = 0.01;
  /// Weight of the L2 term inside the regularizer.
  double beta = 1.0;

  void validate() const
  {
    for (double v : {fidelity, ssim, eagle, vgg, reg, beta}) {
      if (!(v >= 0.0)) throw std::invalid_argument("LossWeights: weights must be nonnegative");
    }
  }
};

struct EagleSpec
{
  int patch = 5;
  HighPassSpec filter{};
  /// Multiplier on the unit-ramp-normalized Scharr kernels.
  double kernel_scale = 1.0;

  void validate() const
  {
    if (patch < 1) throw std::invalid_argument("EagleSpec: patch must be >= 1");
    if (!(kernel_scale > 0.0)) throw std::invalid_argument("EagleSpec: kernel scale must be positive");
    filter.validate();
  }
};

template <class G>
struct LossValue
{
  double value = 0.0;
  std::optional<G> grad;
};

namespace detail {

inline double reduce_factor(Reduction r, std::size_t n) { return r == Reduction::mean ? 1.0 / double(n) : 1.0; }

inline cplx unit_phase(cplx z, double floor)
{
  double const a = std::abs(z);
  return a < floor || a == 0.0 ? cplx{} : z / a;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

} // namespace detail

// ---------------------------------------------------------------------------
// Data fidelity

inline LossValue<MultiCoilKSpace> fidelity_loss(MultiCoilKSpace const& k_pred, MultiCoilKSpace const& k_full,
                                                bool with_grad = false, Reduction red = Reduction::mean)
{
  if (!k_pred.same_shape(k_full)) throw std::invalid_argument("fidelity_loss: shape mismatch");
  double const f = detail::reduce_factor(red, k_pred.size());
  LossValue<MultiCoilKSpace> out;
  double s = 0.0;
  for (std::size_t i = 0; i < k_pred.size(); ++i) s += std::norm(k_pred[i] - k_full[i]);
  out.value = s * f;
  if (with_grad) {
    MultiCoilKSpace g(k_pred.count(), k_pred.height(), k_pred.width());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * f * (k_pred[i] - k_full[i]);
    out.grad = std::move(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SSIM

/// 1 - mean SSIM, dynamic range from the reference unless fixed in `opt`.
inline LossValue<RealImage> ssim_loss(RealImage const& img, RealImage const& ref, bool with_grad = false,
                                      SsimOptions const& opt = {})
{
  SsimResult r = ssim_index(img, ref, opt, with_grad);
  LossValue<RealImage> out{1.0 - r.mean_ssim, std::nullopt};
  if (with_grad) {
    for (auto& v : r.grad->values()) v = -v;
    out.grad = std::move(r.grad);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eagle loss

/// Intermediate products of the Eagle pipeline for one gradient direction.
struct EagleBranch
{
  RealImage gradient;
  VarianceMap variance;
  ComplexImage spectrum;
  RealImage filtered;
};

inline EagleBranch eagle_branch(RealImage const& img, Kernel3 const& k, EagleSpec const& spec,
                                RealImage const& filter)
{
  EagleBranch b;
  b.gradient = correlate3x3(img, k);
  b.variance = patch_variance(b.gradient, spec.patch);
  b.spectrum = fft2c(b.variance.values);
  b.filtered = RealImage(filter.height(), filter.width());
  for (std::size_t i = 0; i < filter.size(); ++i) b.filtered[i] = std::abs(b.spectrum[i]) * filter[i];
  return b;
}

namespace detail {

inline void check_eagle_inputs(RealImage const& img, RealImage const& ref, EagleSpec const& spec)
{
  spec.validate();
  if (!img.same_shape(ref)) throw std::invalid_argument("eagle_loss: image shapes differ");
  std::size_t const min_side = std::max<std::size_t>(3, std::size_t(spec.patch));
  if (img.height() < min_side || img.width() < min_side) {
    throw std::invalid_argument("eagle_loss: image must be at least " + std::to_string(min_side) + "x" +
                                std::to_string(min_side));
  }
}

} // namespace detail

/// Sum over x and y Scharr directions of the L1 distance between high-pass filtered
/// FFT magnitudes of patch-variance maps.
inline LossValue<RealImage> eagle_loss(RealImage const& img, RealImage const& ref, EagleSpec const& spec = {},
                                       bool with_grad = false, Reduction red = Reduction::mean)
{
  detail::check_eagle_inputs(img, ref, spec);
  std::size_t const p = std::size_t(spec.patch);
  std::size_t const rows = padded_extent(img.height(), p) / p;
  std::size_t const cols = padded_extent(img.width(), p) / p;
  RealImage const filter = highpass_filter(rows, cols, spec.filter);
  double const f = detail::reduce_factor(red, filter.size());

  LossValue<RealImage> out;
  if (with_grad) out.grad = RealImage(img.height(), img.width());
  for (Kernel3 const& k : {scharr_x_kernel(spec.kernel_scale), scharr_y_kernel(spec.kernel_scale)}) {
    EagleBranch const a = eagle_branch(img, k, spec, filter);
    EagleBranch const b = eagle_branch(ref, k, spec, filter);
    double s = 0.0;
    for (std::size_t i = 0; i < filter.size(); ++i) s += std::abs(a.filtered[i] - b.filtered[i]);
    out.value += s * f;
    if (!with_grad) continue;

    ComplexImage d_spec(rows, cols);
    for (std::size_t i = 0; i < filter.size(); ++i) {
      double const dm = detail::sign(a.filtered[i] - b.filtered[i]) * f;
      d_spec[i] = dm * filter[i] * detail::unit_phase(a.spectrum[i], 0.0);
    }
    // fft2c is unitary, so the pullback onto the real variance map is Re(ifft2c(.)).
    RealImage const d_var = real_part(ifft2c(d_spec));
    RealImage const d_grad = patch_variance_backward(a.gradient, spec.patch, d_var);
    RealImage const d_img = correlate3x3_adjoint(d_grad, k);
    for (std::size_t i = 0; i < d_img.size(); ++i) (*out.grad)[i] += d_img[i];
  }
  return out;
}

/// Identifies the piece of the piecewise-smooth Eagle loss that `img` sits on: per
/// filtered bin, the sign of the magnitude difference and whether |spectrum| < floor.
/// Two inputs with equal signatures lie in the same differentiable region.
inline std::vector<std::int8_t> eagle_kink_signature(RealImage const& img, RealImage const& ref,
                                                     EagleSpec const& spec, double floor = 1e-8)
{
  detail::check_eagle_inputs(img, ref, spec);
  std::size_t const p = std::size_t(spec.patch);
  RealImage const filter =
    highpass_filter(padded_extent(img.height(), p) / p, padded_extent(img.width(), p) / p, spec.filter);
  std::vector<std::int8_t> sig;
  for (Kernel3 const& k : {scharr_x_kernel(spec.kernel_scale), scharr_y_kernel(spec.kernel_scale)}) {
    EagleBranch const a = eagle_branch(img, k, spec, filter);
    EagleBranch const b = eagle_branch(ref, k, spec, filter);
    for (std::size_t i = 0; i < filter.size(); ++i) {
      if (filter[i] == 0.0) continue;
      sig.push_back(std::int8_t(detail::sign(a.filtered[i] - b.filtered[i])));
      sig.push_back(std::abs(a.spectrum[i]) < floor ? 1 : 0);
    }
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Perceptual loss

struct PerceptualValue : LossValue<RealImage>
{
  bool enabled = false;
};

/// Sum over extractor layers of the mean squared feature difference. A null extractor
/// disables the component.
inline PerceptualValue perceptual_loss(RealImage const& img, RealImage const& ref,
                                       FeatureExtractor const* extractor, bool with_grad = false,
                                       Reduction red = Reduction::mean)
{
  PerceptualValue out;
  if (extractor == nullptr) return out;
  if (!img.same_shape(ref)) throw std::invalid_argument("perceptual_loss: image shapes differ");
  out.enabled = true;
  auto const fa = extractor->forward(img);
  auto const fb = extractor->forward(ref);
  std::vector<FeatureMap> grads;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    double const f = detail::reduce_factor(red, fa[l].size());
    double s = 0.0;
    FeatureMap g(fa[l].count(), fa[l].height(), fa[l].width());
    for (std::size_t i = 0; i < fa[l].size(); ++i) {
      double const d = fa[l][i] - fb[l][i];
      s += d * d;
      g[i] = 2.0 * f * d;
    }
    out.value += s * f;
    grads.push_back(std::move(g));
  }
  if (with_grad) out.grad = extractor->backward(img, grads);
  return out;
}

// ---------------------------------------------------------------------------
// Regularization

/// Below this modulus the L1 subgradient is taken as zero.
inline constexpr double kL1Floor = 1e-12;

/// mean|k| + beta * sqrt(mean|k|^2)  (or ||k||_1 + beta ||k||_2 with Reduction::sum).
inline LossValue<MultiCoilKSpace> reg_loss(MultiCoilKSpace const& k, double beta, bool with_grad = false,
                                           Reduction red = Reduction::mean)
{
  if (!(beta >= 0.0)) throw std::invalid_argument("reg_loss: beta must be nonnegative");
  double const f = detail::reduce_factor(red, k.size());
  double l1 = 0.0;
  double sq = 0.0;
  for (auto const& z : k.values()) {
    l1 += std::abs(z);
    sq += std::norm(z);
  }
  double const l2 = std::sqrt(sq * f);
  LossValue<MultiCoilKSpace> out{l1 * f + beta * l2, std::nullopt};
  if (with_grad) {
    MultiCoilKSpace g(k.count(), k.height(), k.width());
    double const l2_scale = l2 > 0.0 ? beta * f / l2 : 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) g[i] = f * detail::unit_phase(k[i], kL1Floor) + l2_scale * k[i];
    out.grad = std::move(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weighted total

struct LossConfig
{
  LossWeights weights{};
  EagleSpec eagle{};
  SsimOptions ssim{};
  Reduction reduction = Reduction::mean;
  FeatureExtractor const* extractor = nullptr;
};

struct LossReport
{
  double fidelity = 0.0;
  double ssim = 0.0;
  double eagle = 0.0;
  double vgg = 0.0;
  double reg = 0.0;
  double total = 0.0;
  /// Image-domain terms need a reference image; vgg additionally needs an extractor.
  bool image_terms = false;
  bool vgg_enabled = false;
  LossWeights weights{};
  std::optional<MultiCoilKSpace> grad_kspace;
  std::optional<ComplexImage> grad_image;

  /// Weighted sum recomputed from the component fields.
  double weighted_sum() const
  {
    double t = weights.fidelity * fidelity + weights.reg * reg;
    if (image_terms) t += weights.ssim * ssim + weights.eagle * eagle;
    if (vgg_enabled) t += weights.vgg * vgg;
    return t;
  }
};

namespace detail {

struct TermGradients
{
  MultiCoilKSpace k;  // from k-space terms, wrt k_pred
  RealImage img;      // from image terms, wrt img
};

// Evaluates every component. Gradients (already weighted) are accumulated only for
// components with positive weight.
inline LossReport evaluate_terms(MultiCoilKSpace const& k_pred, MultiCoilKSpace const& k_target,
                                 RealImage const& img, RealImage const* ref, LossConfig const& cfg,
                                 TermGradients* grads)
{
  cfg.weights.validate();
  LossWeights const& w = cfg.weights;
  bool const want = grads != nullptr;
  if (want) {
    grads->k = MultiCoilKSpace(k_pred.count(), k_pred.height(), k_pred.width());
    grads->img = RealImage(img.height(), img.width());
  }
  auto add_k = [&](double weight, std::optional<MultiCoilKSpace> const& g) {
    if (!g || weight == 0.0) return;
    for (std::size_t i = 0; i < g->size(); ++i) grads->k[i] += weight * (*g)[i];
  };
  auto add_img = [&](double weight, std::optional<RealImage> const& g) {
    if (!g || weight == 0.0) return;
    for (std::size_t i = 0; i < g->size(); ++i) grads->img[i] += weight * (*g)[i];
  };

  LossReport rep;
  rep.weights = w;
  auto const fid = fidelity_loss(k_pred, k_target, want && w.fidelity > 0, cfg.reduction);
  rep.fidelity = fid.value;
  add_k(w.fidelity, fid.grad);
  auto const reg = reg_loss(k_pred, w.beta, want && w.reg > 0, cfg.reduction);
  rep.reg = reg.value;
  add_k(w.reg, reg.grad);

  if (ref != nullptr) {
    rep.image_terms = true;
    auto const s = ssim_loss(img, *ref, want && w.ssim > 0, cfg.ssim);
    rep.ssim = s.value;
    add_img(w.ssim, s.grad);
    auto const e = eagle_loss(img, *ref, cfg.eagle, want && w.eagle > 0, cfg.reduction);
    rep.eagle = e.value;
    add_img(w.eagle, e.grad);
    auto const v = perceptual_loss(img, *ref, cfg.extractor, want && w.vgg > 0, cfg.reduction);
    rep.vgg_enabled = v.enabled;
    rep.vgg = v.value;
    add_img(w.vgg, v.grad);
  }
  rep.total = rep.weighted_sum();
  return rep;
}

} // namespace detail

/// Values of every component and their weighted total. `ref` may be null, in which
/// case the image-domain terms are disabled.
inline LossReport total_loss(MultiCoilKSpace const& k_pred, MultiCoilKSpace const& k_full, RealImage const& img,
                             RealImage const* ref, LossConfig const& cfg)
{
  if (!k_pred.same_shape(k_full)) throw std::invalid_argument("total_loss: k-space shapes differ");
  return detail::evaluate_terms(k_pred, k_full, img, ref, cfg, nullptr);
}

/// Total loss as a function of predicted k-space. The image is rss(ifft2c(k_pred)); the
/// image-term gradients are pulled back through the RSS and the inverse FFT.
inline LossReport total_loss_wrt_kspace(MultiCoilKSpace const& k_pred, MultiCoilKSpace const& k_full,
                                        RealImage const* ref, LossConfig const& cfg, bool with_grad = true)
{
  if (!k_pred.same_shape(k_full)) throw std::invalid_argument("total_loss: k-space shapes differ");
  CoilImages const coil = ifft2c_coils(k_pred);
  RealImage const img = rss_magnitude(coil);
  detail::TermGradients g;
  LossReport rep = detail::evaluate_terms(k_pred, k_full, img, ref, cfg, with_grad ? &g : nullptr);
  if (!with_grad) return rep;

  std::size_t const n = coil.plane_size();
  CoilImages d_coil(coil.count(), coil.height(), coil.width());
  for (std::size_t c = 0; c < coil.count(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (img[i] > 0.0) d_coil[c * n + i] = g.img[i] * coil[c * n + i] / img[i];
    }
  }
  MultiCoilKSpace d_k = fft2c_coils(d_coil);
  for (std::size_t i = 0; i < d_k.size(); ++i) d_k[i] += g.k[i];
  rep.grad_kspace = std::move(d_k);
  return rep;
}

/// Total loss as a function of a complex image x under the forward model
/// k_pred = fft2c(S_c x). The image term operates on rss(S_c x). With a mask, the
/// fidelity term compares only sampled entries (k_target then holds the measurements).
inline LossReport total_loss_wrt_image(ComplexImage const& x, SensitivityMaps const& maps,
                                       MultiCoilKSpace const& k_target, RealImage const* ref,
                                       LossConfig const& cfg, SamplingMask const* mask = nullptr,
                                       bool with_grad = true, MultiCoilKSpace* k_pred_out = nullptr)
{
  CoilImages const coil = sense_expand(x, maps);
  MultiCoilKSpace const k_pred = fft2c_coils(coil);
  if (k_pred_out != nullptr) *k_pred_out = k_pred;
  if (!k_pred.same_shape(k_target)) throw std::invalid_argument("total_loss: k-space shapes differ");
  RealImage const img = rss_magnitude(coil);

  detail::TermGradients g;
  LossReport rep;
  if (mask != nullptr) {
    // Fidelity on sampled entries only; the regularizer still sees the full prediction.
    MultiCoilKSpace const k_meas_pred = apply_mask(k_pred, *mask);
    LossConfig fid_cfg = cfg;
    fid_cfg.weights.reg = 0.0;
    detail::TermGradients gf;
    LossReport const a = detail::evaluate_terms(k_meas_pred, k_target, img, ref, fid_cfg,
                                                with_grad ? &gf : nullptr);
    auto const reg = reg_loss(k_pred, cfg.weights.beta, with_grad && cfg.weights.reg > 0, cfg.reduction);
    rep = a;
    rep.weights = cfg.weights;
    rep.reg = reg.value;
    rep.total = rep.weighted_sum();
    if (with_grad) {
      g.img = std::move(gf.img);
      g.k = apply_mask(gf.k, *mask);
      if (reg.grad) {
        for (std::size_t i = 0; i < g.k.size(); ++i) g.k[i] += cfg.weights.reg * (*reg.grad)[i];
      }
    }
  } else {
    rep = detail::evaluate_terms(k_pred, k_target, img, ref, cfg, with_grad ? &g : nullptr);
  }
  if (!with_grad) return rep;

  std::size_t const n = coil.plane_size();
  CoilImages d_coil = ifft2c_coils(g.k);
  for (std::size_t c = 0; c < coil.count(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (img[i] > 0.0) d_coil[c * n + i] += g.img[i] * coil[c * n + i] / img[i];
    }
  }
  rep.grad_image = sense_combine(d_coil, maps);
  return rep;
}

} // namespace ksplab
