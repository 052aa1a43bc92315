#pragma once

#include "array.hpp"

#include <algorithm>
#include <optional>

namespace ksplab {

struct SsimOptions
{
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Dynamic range L. Unset means max(ref).
  std::optional<double> data_range;
};

namespace detail {

inline std::vector<double> gaussian_taps(int window, double sigma)
{
  std::vector<double> g(static_cast<std::size_t>(window));
  int const half = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    double const d = double(i - half);
    g[std::size_t(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[std::size_t(i)];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-region separable correlation: output is (H-n+1) x (W-n+1).
inline RealImage blur_valid(RealImage const& x, std::vector<double> const& g)
{
  std::size_t const n = g.size();
  std::size_t const oh = x.height() - n + 1;
  std::size_t const ow = x.width() - n + 1;
  RealImage tmp(x.height(), ow);
  for (std::size_t r = 0; r < x.height(); ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += g[k] * x(r, c + k);
      tmp(r, c) = acc;
    }
  }
  RealImage out(oh, ow);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += g[k] * tmp(r + k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

inline RealImage blur_valid_adjoint(RealImage const& y, std::vector<double> const& g, std::size_t h,
                                    std::size_t w)
{
  std::size_t const n = g.size();
  RealImage tmp(h, y.width());
  for (std::size_t r = 0; r < y.height(); ++r) {
    for (std::size_t c = 0; c < y.width(); ++c) {
      for (std::size_t k = 0; k < n; ++k) tmp(r + k, c) += g[k] * y(r, c);
    }
  }
  RealImage out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < y.width(); ++c) {
      for (std::size_t k = 0; k < n; ++k) out(r, c + k) += g[k] * tmp(r, c);
    }
  }
  return out;
}

inline RealImage hadamard(RealImage const& a, RealImage const& b)
{
  RealImage out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

} // namespace detail

struct SsimResult
{
  double mean_ssim = 0.0;
  /// d(mean SSIM)/d(img), present when requested.
  std::optional<RealImage> grad;
};

inline double ssim_data_range(RealImage const& ref, SsimOptions const& opt)
{
  if (opt.data_range) {
    if (!(*opt.data_range > 0.0)) throw std::invalid_argument("ssim: data range must be positive");
    return *opt.data_range;
  }
  double const mx = ref.empty() ? 0.0 : *std::max_element(ref.begin(), ref.end());
  if (!(mx > 0.0)) throw std::invalid_argument("ssim: reference maximum must be positive");
  return mx;
}

/// Mean SSIM over all valid window positions (Gaussian window, no padding).
inline SsimResult ssim_index(RealImage const& img, RealImage const& ref, SsimOptions const& opt = {},
                             bool with_grad = false)
{
  if (!img.same_shape(ref)) throw std::invalid_argument("ssim: image shapes differ");
  std::size_t const win = std::size_t(opt.window);
  if (img.height() < win || img.width() < win) {
    throw std::invalid_argument("ssim: image must be at least " + std::to_string(win) + "x" +
                                std::to_string(win));
  }
  double const L = ssim_data_range(ref, opt);
  double const c1 = (opt.k1 * L) * (opt.k1 * L);
  double const c2 = (opt.k2 * L) * (opt.k2 * L);
  auto const g = detail::gaussian_taps(opt.window, opt.sigma);

  RealImage const mu_x = detail::blur_valid(img, g);
  RealImage const mu_y = detail::blur_valid(ref, g);
  RealImage const exx = detail::blur_valid(detail::hadamard(img, img), g);
  RealImage const eyy = detail::blur_valid(detail::hadamard(ref, ref), g);
  RealImage const exy = detail::blur_valid(detail::hadamard(img, ref), g);

  std::size_t const positions = mu_x.size();
  double const inv_p = 1.0 / double(positions);
  RealImage d_mu(mu_x.height(), mu_x.width());
  RealImage d_exx(mu_x.height(), mu_x.width());
  RealImage d_exy(mu_x.height(), mu_x.width());

  double sum = 0.0;
  for (std::size_t i = 0; i < positions; ++i) {
    double const mx = mu_x[i];
    double const my = mu_y[i];
    double const sxx = exx[i] - mx * mx;
    double const syy = eyy[i] - my * my;
    double const sxy = exy[i] - mx * my;
    double const a1 = 2.0 * mx * my + c1;
    double const a2 = 2.0 * sxy + c2;
    double const b1 = mx * mx + my * my + c1;
    double const b2 = sxx + syy + c2;
    double const den = b1 * b2;
    double const s = a1 * a2 / den;
    sum += s;
    if (with_grad) {
      // S = A1 A2 / (B1 B2) as a function of the raw moments mu_x, E[x^2], E[xy].
      double const dnum_dmu = 2.0 * my * a2 - 2.0 * my * a1;
      double const dden_dmu = 2.0 * mx * b2 - 2.0 * mx * b1;
      d_mu[i] = (dnum_dmu - s * dden_dmu) / den * inv_p;
      d_exx[i] = -s * b1 / den * inv_p;
      d_exy[i] = 2.0 * a1 / den * inv_p;
    }
  }

  SsimResult out;
  out.mean_ssim = sum * inv_p;
  if (with_grad) {
    std::size_t const h = img.height();
    std::size_t const w = img.width();
    RealImage const gm = detail::blur_valid_adjoint(d_mu, g, h, w);
    RealImage const gxx = detail::blur_valid_adjoint(d_exx, g, h, w);
    RealImage const gxy = detail::blur_valid_adjoint(d_exy, g, h, w);
    RealImage grad(h, w);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = gm[i] + 2.0 * img[i] * gxx[i] + ref[i] * gxy[i];
    out.grad = std::move(grad);
  }
  return out;
}

} // namespace ksplab
