#pragma once

#include "fft.hpp"

namespace ksplab {

/// out(x,y) = sqrt(sum_c |I_c(x,y)|^2), returned as a complex image with zero imaginary part.
inline ComplexImage rss_combine(CoilImages const& coil_imgs)
{
  if (coil_imgs.count() < 1) throw std::invalid_argument("rss_combine: need at least one coil");
  std::size_t const n = coil_imgs.plane_size();
  ComplexImage out(coil_imgs.height(), coil_imgs.width());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < coil_imgs.count(); ++c) s += std::norm(coil_imgs[c * n + i]);
    out[i] = std::sqrt(s);
  }
  return out;
}

/// Real-valued variant of rss_combine for callers that only need the magnitude image.
inline RealImage rss_magnitude(CoilImages const& coil_imgs) { return real_part(rss_combine(coil_imgs)); }

/// I_c = S_c * img for every coil.
inline CoilImages sense_expand(ComplexImage const& img, SensitivityMaps const& maps)
{
  if (img.height() != maps.height() || img.width() != maps.width()) {
    throw std::invalid_argument("sense_expand: image " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()) + " does not match maps " +
                                std::to_string(maps.height()) + "x" + std::to_string(maps.width()));
  }
  CoilImages out(maps.count(), maps.height(), maps.width());
  std::size_t const n = maps.plane_size();
  for (std::size_t c = 0; c < maps.count(); ++c) {
    for (std::size_t i = 0; i < n; ++i) out[c * n + i] = maps[c * n + i] * img[i];
  }
  return out;
}

inline CoilImages sense_expand(RealImage const& img, SensitivityMaps const& maps)
{
  return sense_expand(to_complex(img), maps);
}

/// Adjoint of sense_expand: sum_c conj(S_c) * I_c.
inline ComplexImage sense_combine(CoilImages const& coil_imgs, SensitivityMaps const& maps)
{
  if (!coil_imgs.same_shape(maps)) throw std::invalid_argument("sense_combine: shape mismatch");
  std::size_t const n = maps.plane_size();
  ComplexImage out(maps.height(), maps.width());
  for (std::size_t c = 0; c < maps.count(); ++c) {
    for (std::size_t i = 0; i < n; ++i) out[i] += std::conj(maps[c * n + i]) * coil_imgs[c * n + i];
  }
  return out;
}

inline MultiCoilKSpace fft2c_coils(CoilImages const& imgs)
{
  MultiCoilKSpace out(imgs.count(), imgs.height(), imgs.width());
  for (std::size_t c = 0; c < imgs.count(); ++c) out.set_slice(c, fft2c(imgs.slice(c)));
  return out;
}

inline CoilImages ifft2c_coils(MultiCoilKSpace const& ksp)
{
  CoilImages out(ksp.count(), ksp.height(), ksp.width());
  for (std::size_t c = 0; c < ksp.count(); ++c) out.set_slice(c, ifft2c(ksp.slice(c)));
  return out;
}

} // namespace ksplab
