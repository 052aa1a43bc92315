#pragma once

#include "losses.hpp"

#include <limits>

namespace ksplab {

/// Mean SSIM; identical kernel and constants to ssim_loss, so ssim = 1 - ssim_loss.
inline double ssim(RealImage const& img, RealImage const& ref, SsimOptions const& opt = {})
{
  return 1.0 - ssim_loss(img, ref, false, opt).value;
}

/// Returned by psnr when the images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(max(ref)^2 / MSE). `data_range` overrides max(ref).
inline double psnr(RealImage const& img, RealImage const& ref, std::optional<double> data_range = std::nullopt)
{
  if (!img.same_shape(ref) || img.empty()) throw std::invalid_argument("psnr: image shapes differ");
  SsimOptions opt;
  opt.data_range = data_range;
  double const L = ssim_data_range(ref, opt);
  double mse = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) mse += (img[i] - ref[i]) * (img[i] - ref[i]);
  mse /= double(img.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(L * L / mse);
}

/// ||img - ref||^2 / ||ref||^2.
inline double nmse(RealImage const& img, RealImage const& ref)
{
  if (!img.same_shape(ref)) throw std::invalid_argument("nmse: image shapes differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    num += (img[i] - ref[i]) * (img[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw std::invalid_argument("nmse: reference has zero norm");
  return num / den;
}

/// Default band for hf_nmse; the ablation harness uses this unless told otherwise.
inline HighPassSpec default_hf_band() { return HighPassSpec{FilterKind::butterworth, 0.25, 4}; }

/// NMSE between the high-pass filtered centered spectra of img and ref.
inline double hf_nmse(RealImage const& img, RealImage const& ref, HighPassSpec const& spec = default_hf_band())
{
  if (!img.same_shape(ref)) throw std::invalid_argument("hf_nmse: image shapes differ");
  RealImage const h = highpass_filter(img.height(), img.width(), spec);
  ComplexImage const a = fft2c(img);
  ComplexImage const b = fft2c(ref);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    num += h[i] * h[i] * std::norm(a[i] - b[i]);
    den += h[i] * h[i] * std::norm(b[i]);
  }
  if (den == 0.0) throw std::invalid_argument("hf_nmse: reference has no energy in the high-pass band");
  return num / den;
}

} // namespace ksplab
