#pragma once

#include "array.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>

namespace ksplab {

enum class MaskKind { uniform, random };
enum class PhaseAxis { rows, cols };

inline char const* to_string(MaskKind k) { return k == MaskKind::uniform ? "uniform" : "random"; }
inline char const* to_string(PhaseAxis a) { return a == PhaseAxis::rows ? "rows" : "cols"; }

inline MaskKind parse_mask_kind(std::string const& s)
{
  if (s == "uniform") return MaskKind::uniform;
  if (s == "random") return MaskKind::random;
  throw std::invalid_argument("unknown mask kind '" + s + "'");
}

inline PhaseAxis parse_phase_axis(std::string const& s)
{
  if (s == "rows") return PhaseAxis::rows;
  if (s == "cols") return PhaseAxis::cols;
  throw std::invalid_argument("unknown phase axis '" + s + "'");
}

/// Line mask over the phase-encode axis, broadcast along the readout axis.
struct SamplingMask
{
  std::size_t height = 0;
  std::size_t width = 0;
  MaskKind kind = MaskKind::uniform;
  int acceleration = 1;
  std::size_t acs_lines = 0;
  std::size_t offset = 0;
  PhaseAxis phase_axis = PhaseAxis::cols;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint8_t> pattern;

  std::size_t axis_length() const noexcept { return phase_axis == PhaseAxis::cols ? width : height; }

  /// First index of the centered ACS block.
  std::size_t acs_start() const noexcept { return axis_length() / 2 - acs_lines / 2; }

  std::size_t sampled_lines() const noexcept
  {
    std::size_t n = 0;
    for (auto v : pattern) n += v;
    return n;
  }

  double sampling_fraction() const noexcept
  {
    return pattern.empty() ? 0.0 : double(sampled_lines()) / double(pattern.size());
  }

  bool sampled(std::size_t r, std::size_t c) const noexcept
  {
    return pattern[phase_axis == PhaseAxis::cols ? c : r] != 0;
  }

  bool is_acs_line(std::size_t line) const noexcept
  {
    return line >= acs_start() && line < acs_start() + acs_lines;
  }

  friend bool operator==(SamplingMask const&, SamplingMask const&) = default;
};

namespace detail {

inline void check_mask_args(std::size_t height, std::size_t width, int R, std::size_t acs, PhaseAxis axis)
{
  if (height == 0 || width == 0) throw std::invalid_argument("mask: dimensions must be positive");
  if (R < 1) throw std::invalid_argument("mask: acceleration must be >= 1");
  std::size_t const n = axis == PhaseAxis::cols ? width : height;
  if (acs > n) {
    throw std::invalid_argument("mask: acs lines (" + std::to_string(acs) + ") exceed axis length (" +
                                std::to_string(n) + ")");
  }
}

inline void mark_acs(SamplingMask& m)
{
  for (std::size_t i = 0; i < m.acs_lines; ++i) m.pattern[m.acs_start() + i] = 1;
}

// Unbiased draw from [0, bound) using raw engine output only, so sequences do not
// depend on the standard library's distribution implementation.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound)
{
  std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

} // namespace detail

/// Every R-th line from `offset`, plus the `acs` centermost lines.
inline SamplingMask make_uniform_mask(std::size_t height, std::size_t width, int R, std::size_t acs,
                                      PhaseAxis axis = PhaseAxis::cols, std::size_t offset = 0)
{
  detail::check_mask_args(height, width, R, acs, axis);
  SamplingMask m{height, width, MaskKind::uniform, R, acs, offset, axis, std::nullopt, {}};
  std::size_t const n = m.axis_length();
  m.pattern.assign(n, 0);
  for (std::size_t i = offset % std::size_t(R); i < n; i += std::size_t(R)) m.pattern[i] = 1;
  detail::mark_acs(m);
  return m;
}

/// ACS lines plus uniformly drawn lines (without replacement) up to max(round(n/R), acs) in total.
inline SamplingMask make_random_mask(std::size_t height, std::size_t width, int R, std::size_t acs,
                                     std::uint64_t seed, PhaseAxis axis = PhaseAxis::cols)
{
  detail::check_mask_args(height, width, R, acs, axis);
  SamplingMask m{height, width, MaskKind::random, R, acs, 0, axis, seed, {}};
  std::size_t const n = m.axis_length();
  m.pattern.assign(n, 0);
  detail::mark_acs(m);

  std::size_t const target =
    std::max<std::size_t>(std::size_t(std::llround(double(n) / double(R))), acs);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n; ++i) {
    if (!m.pattern[i]) pool.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::size_t const draws = target - acs;
  // Partial Fisher-Yates: the first `draws` slots become the sample.
  for (std::size_t i = 0; i < draws; ++i) {
    std::size_t const j = i + std::size_t(detail::bounded(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
    m.pattern[pool[i]] = 1;
  }
  return m;
}

template <class T>
void check_mask_shape(Stack<T> const& k, SamplingMask const& mask, char const* who)
{
  if (k.height() != mask.height || k.width() != mask.width ||
      mask.pattern.size() != mask.axis_length()) {
    throw std::invalid_argument(std::string(who) + ": k-space " + std::to_string(k.height()) + "x" +
                                std::to_string(k.width()) + " does not match mask " +
                                std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
}

/// Zeroes unsampled entries; sampled entries are copied unchanged.
inline MultiCoilKSpace apply_mask(MultiCoilKSpace const& ksp, SamplingMask const& mask)
{
  check_mask_shape(ksp, mask, "apply_mask");
  MultiCoilKSpace out(ksp.count(), ksp.height(), ksp.width());
  for (std::size_t c = 0; c < ksp.count(); ++c) {
    for (std::size_t r = 0; r < ksp.height(); ++r) {
      for (std::size_t x = 0; x < ksp.width(); ++x) {
        if (mask.sampled(r, x)) out(c, r, x) = ksp(c, r, x);
      }
    }
  }
  return out;
}

} // namespace ksplab
