#pragma once

#include "losses.hpp"

#include <functional>
#include <numeric>
#include <random>

namespace ksplab {

struct GradCheckOptions
{
  double epsilon = 1e-5;
  double tolerance = 1e-6;
  /// Number of coordinates to probe; all of them when the input is smaller.
  std::size_t samples = 64;
  std::uint64_t seed = 0;
};

struct GradCheckReport
{
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates skipped because the difference stencil crossed a nondifferentiable point.
  std::size_t excluded = 0;
  bool pass = false;
};

using ScalarFn = std::function<double(std::vector<double> const&)>;
using SignatureFn = std::function<std::vector<std::int8_t>(std::vector<double> const&)>;

/// Relative error |a - f| / max(|a|, |f|, floor), where floor = 1e-8 * max|analytic|
/// keeps coordinates with vanishing gradient from dominating.
inline double relative_error(double analytic, double numeric, double floor)
{
  double const den = std::max({std::abs(analytic), std::abs(numeric), floor});
  return den == 0.0 ? 0.0 : std::abs(analytic - numeric) / den;
}

/// Compares `analytic` against central differences of `f` at `x` on a seeded random
/// subset of coordinates. With a signature function, coordinates whose +/- probes land
/// on different smooth pieces are excluded.
inline GradCheckReport grad_check(ScalarFn const& f, std::vector<double> const& x,
                                  std::vector<double> const& analytic, GradCheckOptions const& opt,
                                  SignatureFn const& signature = {})
{
  if (!(opt.epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be positive");
  if (x.size() != analytic.size()) throw std::invalid_argument("grad_check: gradient size mismatch");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  std::mt19937_64 rng(opt.seed);
  std::size_t const n = std::min(opt.samples, coords.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t const j = i + std::size_t(detail::bounded(rng, coords.size() - i));
    std::swap(coords[i], coords[j]);
  }

  double gmax = 0.0;
  for (double v : analytic) gmax = std::max(gmax, std::abs(v));
  double const floor = 1e-8 * gmax;

  GradCheckReport rep;
  std::vector<double> probe = x;
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t const i = coords[s];
    probe[i] = x[i] + opt.epsilon;
    double const fp = f(probe);
    auto const sp = signature ? signature(probe) : std::vector<std::int8_t>{};
    probe[i] = x[i] - opt.epsilon;
    double const fm = f(probe);
    auto const sm = signature ? signature(probe) : std::vector<std::int8_t>{};
    probe[i] = x[i];
    if (signature && sp != sm) {
      ++rep.excluded;
      continue;
    }
    double const numeric = (fp - fm) / (2.0 * opt.epsilon);
    rep.max_rel_error = std::max(rep.max_rel_error, relative_error(analytic[i], numeric, floor));
    ++rep.checked;
  }
  rep.pass = rep.checked > 0 && rep.max_rel_error < opt.tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Flattening helpers: complex arrays are probed as interleaved (re, im) coordinates.

inline std::vector<double> flatten(RealImage const& x) { return x.values(); }

inline std::vector<double> flatten(std::vector<cplx> const& z)
{
  std::vector<double> out(2 * z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[2 * i] = z[i].real();
    out[2 * i + 1] = z[i].imag();
  }
  return out;
}

inline std::vector<cplx> unflatten_complex(std::vector<double> const& v)
{
  std::vector<cplx> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

// ---------------------------------------------------------------------------
// Named checks used by the CLI and the acceptance suite.

enum class LossSelector { fidelity, ssim, eagle, perceptual, reg, total };

inline LossSelector parse_loss_selector(std::string const& s)
{
  if (s == "fidelity") return LossSelector::fidelity;
  if (s == "ssim") return LossSelector::ssim;
  if (s == "eagle") return LossSelector::eagle;
  if (s == "perceptual" || s == "vgg") return LossSelector::perceptual;
  if (s == "reg") return LossSelector::reg;
  if (s == "total") return LossSelector::total;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

/// Default epsilon and tolerance per loss.
struct GradCheckDefaults
{
  double epsilon;
  double tolerance;
};

inline GradCheckDefaults gradcheck_defaults(LossSelector sel)
{
  switch (sel) {
  case LossSelector::fidelity: return {1e-5, 1e-6};
  case LossSelector::ssim: return {1e-3, 1e-4};
  case LossSelector::eagle: return {1e-4, 1e-3};
  case LossSelector::perceptual: return {1e-5, 1e-5};
  case LossSelector::reg: return {1e-5, 1e-6};
  case LossSelector::total: return {1e-5, 1e-4};
  }
  return {1e-5, 1e-6};
}

namespace detail {

inline std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double lo, double hi)
{
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * double(rng() >> 11) * 0x1.0p-53;
  return v;
}

} // namespace detail

/// Builds a random problem of the given size for `sel` and checks its analytic gradient.
/// Image losses use real size x size images; k-space losses use a two-coil stack.
inline GradCheckReport run_gradcheck(LossSelector sel, std::size_t size, std::uint64_t seed,
                                     std::optional<double> epsilon = std::nullopt,
                                     std::optional<double> tolerance = std::nullopt, std::size_t samples = 64)
{
  GradCheckDefaults const d = gradcheck_defaults(sel);
  GradCheckOptions opt{epsilon.value_or(d.epsilon), tolerance.value_or(d.tolerance), samples, seed ^ 0x9e3779b9ULL};
  std::mt19937_64 rng(seed);

  switch (sel) {
  case LossSelector::fidelity:
  case LossSelector::reg: {
    std::size_t const coils = sel == LossSelector::fidelity ? 1 : 2;
    std::size_t const n = coils * size * size;
    auto const a = unflatten_complex(detail::uniform_values(rng, 2 * n, -1.0, 1.0));
    auto const b = unflatten_complex(detail::uniform_values(rng, 2 * n, -1.0, 1.0));
    MultiCoilKSpace const target(coils, size, size, b);
    double const beta = 0.5;
    auto eval = [&](std::vector<double> const& v, bool grad) {
      MultiCoilKSpace const k(coils, size, size, unflatten_complex(v));
      return sel == LossSelector::fidelity ? fidelity_loss(k, target, grad) : reg_loss(k, beta, grad);
    };
    std::vector<double> const x = flatten(a);
    auto const lv = eval(x, true);
    SignatureFn sig;
    if (sel == LossSelector::reg) {
      // The L1 term is smooth away from |z| < 1e-6.
      sig = [](std::vector<double> const& v) {
        std::vector<std::int8_t> s;
        for (auto const& z : unflatten_complex(v)) s.push_back(std::abs(z) < 1e-6 ? 1 : 0);
        return s;
      };
    }
    return grad_check([&](std::vector<double> const& v) { return eval(v, false).value; }, x,
                      flatten(lv.grad->values()), opt, sig);
  }
  case LossSelector::ssim:
  case LossSelector::eagle:
  case LossSelector::perceptual: {
    RealImage const img(size, size, detail::uniform_values(rng, size * size, 0.0, 1.0));
    RealImage const ref(size, size, detail::uniform_values(rng, size * size, 0.0, 1.0));
    EagleSpec const spec{};
    auto const extractor = ConvStackExtractor::reference();
    auto eval = [&](std::vector<double> const& v, bool grad) -> LossValue<RealImage> {
      RealImage const x(size, size, v);
      if (sel == LossSelector::ssim) return ssim_loss(x, ref, grad);
      if (sel == LossSelector::eagle) return eagle_loss(x, ref, spec, grad);
      return perceptual_loss(x, ref, &extractor, grad);
    };
    auto const lv = eval(img.values(), true);
    SignatureFn sig;
    if (sel == LossSelector::eagle) {
      sig = [&](std::vector<double> const& v) { return eagle_kink_signature(RealImage(size, size, v), ref, spec); };
    }
    return grad_check([&](std::vector<double> const& v) { return eval(v, false).value; }, img.values(),
                      lv.grad->values(), opt, sig);
  }
  case LossSelector::total: {
    // Complex image variable through a two-coil forward model, every term active.
    std::size_t const n = size * size;
    SensitivityMaps maps(2, size, size);
    auto const raw = unflatten_complex(detail::uniform_values(rng, 4 * n, 0.2, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
      double const r = std::sqrt(std::norm(raw[i]) + std::norm(raw[n + i]));
      maps[i] = raw[i] / r;
      maps[n + i] = raw[n + i] / r;
    }
    RealImage const ref(size, size, detail::uniform_values(rng, n, 0.1, 1.0));
    auto const x0 = unflatten_complex(detail::uniform_values(rng, 2 * n, 0.1, 1.0));
    MultiCoilKSpace const k_full = fft2c_coils(sense_expand(ref, maps));
    auto const extractor = ConvStackExtractor::reference();
    LossConfig cfg;
    cfg.extractor = &extractor;
    auto eval = [&](std::vector<double> const& v, bool grad) {
      ComplexImage const x(size, size, unflatten_complex(v));
      return total_loss_wrt_image(x, maps, k_full, &ref, cfg, nullptr, grad);
    };
    std::vector<double> const x = flatten(x0);
    auto const rep = eval(x, true);
    SignatureFn sig = [&](std::vector<double> const& v) {
      ComplexImage const xi(size, size, unflatten_complex(v));
      RealImage const img = rss_magnitude(sense_expand(xi, maps));
      auto s = eagle_kink_signature(img, ref, cfg.eagle);
      MultiCoilKSpace const k = fft2c_coils(sense_expand(xi, maps));
      for (auto const& z : k.values()) s.push_back(std::abs(z) < 1e-6 ? 1 : 0);
      return s;
    };
    return grad_check([&](std::vector<double> const& v) { return eval(v, false).total; }, x,
                      flatten(rep.grad_image->values()), opt, sig);
  }
  }
  return {};
}

} // namespace ksplab
