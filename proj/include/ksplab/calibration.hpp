#pragma once

#include "coils.hpp"
#include "sampling.hpp"

namespace ksplab {

struct CalibrationOptions
{
  /// Number of ACS lines on each edge that receive a raised-cosine taper.
  std::size_t taper_lines = 2;
  /// Pixels whose coil RSS falls below this get all-zero maps.
  double rss_floor = 1e-12;
};

/// Weight applied to ACS line `j` (0-based within the block) of `acs` lines.
inline double acs_taper_weight(std::size_t j, std::size_t acs, std::size_t taper)
{
  std::size_t const edge = std::min(j, acs - 1 - j);
  if (edge >= taper) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * double(edge + 1) / double(taper + 1)));
}

/// Low-resolution sensitivity estimate from the ACS block: ifft2c of tapered ACS-only
/// k-space per coil, normalized by the coil RSS so that sum_c |S_c|^2 = 1.
inline SensitivityMaps estimate_sens_maps(MultiCoilKSpace const& masked_ksp, SamplingMask const& mask,
                                          CalibrationOptions const& opt = {})
{
  check_mask_shape(masked_ksp, mask, "estimate_sens_maps");
  if (mask.acs_lines < 2) {
    throw std::invalid_argument("estimate_sens_maps: need at least 2 ACS lines, got " +
                                std::to_string(mask.acs_lines));
  }
  std::size_t const start = mask.acs_start();
  std::size_t const n_axis = mask.axis_length();
  std::vector<double> line_weight(n_axis, 0.0);
  for (std::size_t j = 0; j < mask.acs_lines; ++j) {
    line_weight[start + j] = acs_taper_weight(j, mask.acs_lines, opt.taper_lines);
  }

  MultiCoilKSpace acs(masked_ksp.count(), masked_ksp.height(), masked_ksp.width());
  for (std::size_t c = 0; c < acs.count(); ++c) {
    for (std::size_t r = 0; r < acs.height(); ++r) {
      for (std::size_t x = 0; x < acs.width(); ++x) {
        double const w = line_weight[mask.phase_axis == PhaseAxis::cols ? x : r];
        if (w != 0.0) acs(c, r, x) = masked_ksp(c, r, x) * w;
      }
    }
  }

  CoilImages low = ifft2c_coils(acs);
  RealImage const rss = rss_magnitude(low);
  std::size_t const n = low.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    bool const dark = rss[i] < opt.rss_floor;
    for (std::size_t c = 0; c < low.count(); ++c) {
      low[c * n + i] = dark ? cplx{} : low[c * n + i] / rss[i];
    }
  }
  return SensitivityMaps(std::move(low));
}

} // namespace ksplab
