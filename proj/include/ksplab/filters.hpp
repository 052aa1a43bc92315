#pragma once

#include "fft.hpp"

#include <array>

namespace ksplab {

// ---------------------------------------------------------------------------
// Reflect padding

/// Mirror index without repeating the edge sample (…2 1 | 0 1 2 … n-1 | n-2 …).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n)
{
  if (n == 1) return 0;
  std::ptrdiff_t const period = 2 * (std::ptrdiff_t(n) - 1);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return std::size_t(m < std::ptrdiff_t(n) ? m : period - m);
}

// ---------------------------------------------------------------------------
// Scharr gradients

using Kernel3 = std::array<std::array<double, 3>, 3>;

/// Horizontal Scharr kernel [[-3,0,3],[-10,0,10],[-3,0,3]] scaled so a unit-slope
/// ramp gives a unit response. `scale` multiplies on top of that normalization.
inline Kernel3 scharr_x_kernel(double scale = 1.0)
{
  double const s = scale / 32.0;
  return {{{-3 * s, 0, 3 * s}, {-10 * s, 0, 10 * s}, {-3 * s, 0, 3 * s}}};
}

inline Kernel3 scharr_y_kernel(double scale = 1.0)
{
  Kernel3 const kx = scharr_x_kernel(scale);
  Kernel3 ky{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) ky[i][j] = kx[j][i];
  }
  return ky;
}

/// 3x3 correlation with reflect padding; output has the input's shape.
inline RealImage correlate3x3(RealImage const& img, Kernel3 const& k)
{
  std::size_t const h = img.height();
  std::size_t const w = img.width();
  RealImage out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        std::size_t const rr = reflect_index(std::ptrdiff_t(r) + dr, h);
        for (int dc = -1; dc <= 1; ++dc) {
          acc += k[dr + 1][dc + 1] * img(rr, reflect_index(std::ptrdiff_t(c) + dc, w));
        }
      }
      out(r, c) = acc;
    }
  }
  return out;
}

/// Adjoint of correlate3x3: scatters each output sensitivity back to its reflected sources.
inline RealImage correlate3x3_adjoint(RealImage const& grad_out, Kernel3 const& k)
{
  std::size_t const h = grad_out.height();
  std::size_t const w = grad_out.width();
  RealImage out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double const g = grad_out(r, c);
      if (g == 0.0) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        std::size_t const rr = reflect_index(std::ptrdiff_t(r) + dr, h);
        for (int dc = -1; dc <= 1; ++dc) {
          out(rr, reflect_index(std::ptrdiff_t(c) + dc, w)) += k[dr + 1][dc + 1] * g;
        }
      }
    }
  }
  return out;
}

struct Gradients
{
  RealImage gx;
  RealImage gy;
};

inline Gradients scharr_gradients(RealImage const& img, double kernel_scale = 1.0)
{
  if (img.height() < 3 || img.width() < 3) {
    throw std::invalid_argument("scharr_gradients: image must be at least 3x3, got " +
                                std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  return {correlate3x3(img, scharr_x_kernel(kernel_scale)),
          correlate3x3(img, scharr_y_kernel(kernel_scale))};
}

// ---------------------------------------------------------------------------
// Patch variance

/// Population variance of non-overlapping patch x patch tiles.
struct VarianceMap
{
  std::size_t patch = 1;
  RealImage values;

  std::size_t patch_rows() const noexcept { return values.height(); }
  std::size_t patch_cols() const noexcept { return values.width(); }
};

inline std::size_t padded_extent(std::size_t n, std::size_t p) { return (n + p - 1) / p * p; }

/// Bottom/right reflect padding to the next multiple of p, then per-tile variance (divide by p^2).
inline VarianceMap patch_variance(RealImage const& g, int patch)
{
  if (patch <= 0) throw std::invalid_argument("patch_variance: patch size must be positive");
  if (g.empty()) throw std::invalid_argument("patch_variance: empty input");
  std::size_t const p = std::size_t(patch);
  std::size_t const h = g.height();
  std::size_t const w = g.width();
  std::size_t const rows = padded_extent(h, p) / p;
  std::size_t const cols = padded_extent(w, p) / p;
  double const inv = 1.0 / double(p * p);

  VarianceMap v{p, RealImage(rows, cols)};
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      double mean = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        std::size_t const r = reflect_index(std::ptrdiff_t(pr * p + i), h);
        for (std::size_t j = 0; j < p; ++j) mean += g(r, reflect_index(std::ptrdiff_t(pc * p + j), w));
      }
      mean *= inv;
      double var = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        std::size_t const r = reflect_index(std::ptrdiff_t(pr * p + i), h);
        for (std::size_t j = 0; j < p; ++j) {
          double const d = g(r, reflect_index(std::ptrdiff_t(pc * p + j), w)) - mean;
          var += d * d;
        }
      }
      v.values(pr, pc) = var * inv;
    }
  }
  return v;
}

/// Vector-Jacobian product of patch_variance: d var / d x_i = 2 (x_i - mean) / p^2,
/// accumulated onto the reflected source pixel.
inline RealImage patch_variance_backward(RealImage const& g, int patch, RealImage const& grad_var)
{
  std::size_t const p = std::size_t(patch);
  std::size_t const h = g.height();
  std::size_t const w = g.width();
  double const inv = 1.0 / double(p * p);
  RealImage out(h, w);
  for (std::size_t pr = 0; pr < grad_var.height(); ++pr) {
    for (std::size_t pc = 0; pc < grad_var.width(); ++pc) {
      double const gv = grad_var(pr, pc);
      if (gv == 0.0) continue;
      double mean = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        std::size_t const r = reflect_index(std::ptrdiff_t(pr * p + i), h);
        for (std::size_t j = 0; j < p; ++j) mean += g(r, reflect_index(std::ptrdiff_t(pc * p + j), w));
      }
      mean *= inv;
      for (std::size_t i = 0; i < p; ++i) {
        std::size_t const r = reflect_index(std::ptrdiff_t(pr * p + i), h);
        for (std::size_t j = 0; j < p; ++j) {
          std::size_t const c = reflect_index(std::ptrdiff_t(pc * p + j), w);
          out(r, c) += gv * 2.0 * (g(r, c) - mean) * inv;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// High-pass filters

enum class FilterKind { butterworth, gaussian };

inline char const* to_string(FilterKind k) { return k == FilterKind::butterworth ? "butterworth" : "gaussian"; }

inline FilterKind parse_filter_kind(std::string const& s)
{
  if (s == "butterworth") return FilterKind::butterworth;
  if (s == "gaussian") return FilterKind::gaussian;
  throw std::invalid_argument("unknown filter kind '" + s + "'");
}

/// Radial high-pass response. Frequencies are in cycles/sample per axis (Nyquist = 0.5),
/// so the radius reaches ~0.707 in the corners of the centered spectrum.
struct HighPassSpec
{
  FilterKind kind = FilterKind::butterworth;
  double cutoff = 0.35;
  int order = 4;

  void validate() const
  {
    if (!(cutoff > 0.0 && cutoff <= 0.5)) {
      throw std::invalid_argument("HighPassSpec: cutoff must lie in (0, 0.5], got " + std::to_string(cutoff));
    }
    if (order < 1) throw std::invalid_argument("HighPassSpec: order must be >= 1");
  }
};

inline double butterworth_response(double radius, double cutoff, int order)
{
  if (radius == 0.0) return 0.0;
  return 1.0 / (1.0 + std::pow(cutoff / radius, 2.0 * order));
}

inline double gaussian_response(double radius, double cutoff)
{
  return 1.0 - std::exp(-radius * radius / (2.0 * cutoff * cutoff));
}

inline double highpass_response(double radius, HighPassSpec const& spec)
{
  return spec.kind == FilterKind::butterworth ? butterworth_response(radius, spec.cutoff, spec.order)
                                              : gaussian_response(radius, spec.cutoff);
}

/// Normalized frequency of centered index i on an axis of length n, in [-0.5, 0.5).
inline double centered_frequency(std::size_t i, std::size_t n)
{
  return (double(i) - double(n / 2)) / double(n);
}

/// Filter weights laid out like a centered spectrum (zero frequency at (h/2, w/2)).
inline RealImage highpass_filter(std::size_t h, std::size_t w, HighPassSpec const& spec)
{
  spec.validate();
  RealImage out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    double const fu = centered_frequency(r, h);
    for (std::size_t c = 0; c < w; ++c) {
      double const fv = centered_frequency(c, w);
      out(r, c) = highpass_response(std::sqrt(fu * fu + fv * fv), spec);
    }
  }
  return out;
}

/// |fft2c(v)| weighted by the matching high-pass filter.
inline RealImage filtered_magnitude(VarianceMap const& v, HighPassSpec const& spec)
{
  RealImage const filt = highpass_filter(v.patch_rows(), v.patch_cols(), spec);
  ComplexImage const spectrum = fft2c(v.values);
  RealImage out(filt.height(), filt.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(spectrum[i]) * filt[i];
  return out;
}

} // namespace ksplab
