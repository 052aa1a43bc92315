#pragma once

#include "coils.hpp"

#include <cstdint>
#include <numbers>
#include <random>

namespace ksplab {

enum class PhantomKind { shepp_logan, cardiac };

inline char const* to_string(PhantomKind k) { return k == PhantomKind::shepp_logan ? "shepp-logan" : "cardiac"; }

inline PhantomKind parse_phantom_kind(std::string const& s)
{
  if (s == "shepp-logan" || s == "shepp_logan") return PhantomKind::shepp_logan;
  if (s == "cardiac") return PhantomKind::cardiac;
  throw std::invalid_argument("unknown phantom kind '" + s + "'");
}

struct PhantomSpec
{
  std::size_t height = 128;
  std::size_t width = 128;
  std::size_t coils = 10;
  std::uint64_t seed = 0;
  PhantomKind kind = PhantomKind::cardiac;
  std::size_t frames = 1;

  void validate() const
  {
    if (height < 1 || width < 1) throw std::invalid_argument("PhantomSpec: empty image");
    if (coils < 1) throw std::invalid_argument("PhantomSpec: coils must be >= 1");
    if (frames < 1) throw std::invalid_argument("PhantomSpec: frames must be >= 1");
  }
};

struct Phantom
{
  std::vector<RealImage> frames;
  SensitivityMaps maps;
  /// 1 where the first frame has nonzero intensity.
  Grid<std::uint8_t> support;
};

/// Ellipse on the [-1,1]^2 field of view; x runs along the width, y along the height.
struct Ellipse
{
  double intensity;
  double a;
  double b;
  double x0;
  double y0;
  double theta_deg;

  bool contains(double x, double y) const
  {
    double const t = theta_deg * std::numbers::pi / 180.0;
    double const dx = x - x0;
    double const dy = y - y0;
    double const u = dx * std::cos(t) + dy * std::sin(t);
    double const v = -dx * std::sin(t) + dy * std::cos(t);
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

namespace detail {

class PhantomRng
{
public:
  explicit PhantomRng(std::uint64_t seed) : rng_(seed) {}
  /// Uniform in [lo, hi), built from raw engine bits only.
  double uniform(double lo, double hi) { return lo + (hi - lo) * double(rng_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 rng_;
};

inline std::vector<Ellipse> shepp_logan_ellipses()
{
  // Modified (high-contrast) Shepp-Logan set.
  return {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0},       {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18},   {-0.2, 0.16, 0.41, -0.22, 0.0, 18},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0},      {0.1, 0.046, 0.046, 0.0, 0.1, 0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0},    {0.1, 0.046, 0.023, -0.08, -0.605, 0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0},  {0.1, 0.023, 0.046, 0.06, -0.605, 0},
  };
}

// Short-axis analog: torso, myocardium around a bright blood pool, right ventricle,
// spine and vessels, with small dark papillary muscles inside the pool.
inline std::vector<Ellipse> cardiac_ellipses(double contraction)
{
  double const lv = 0.20 * (1.0 - 0.08 * contraction);
  double const myo = 0.32 * (1.0 - 0.03 * contraction);
  return {
    {0.35, 0.85, 0.65, 0.0, 0.0, 0},
    {0.25, myo, myo * 0.94, 0.1, 0.05, 0},
    {0.35, lv, lv * 0.95, 0.1, 0.05, 0},
    {0.45, 0.15, 0.28, -0.33, 0.05, 12},
    {0.30, 0.08, 0.08, 0.0, 0.55, 0},
    {0.50, 0.06, 0.06, 0.45, -0.35, 0},
    {0.40, 0.05, 0.05, -0.1, -0.45, 0},
    {-0.35, 0.035, 0.035, 0.05, 0.12, 0},
    {-0.35, 0.03, 0.03, 0.17, 0.10, 0},
  };
}

inline RealImage rasterize(std::vector<Ellipse> const& ellipses, std::size_t h, std::size_t w)
{
  // 2x2 supersampling per pixel.
  constexpr double offsets[2] = {0.25, 0.75};
  RealImage img(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (double oy : offsets) {
        for (double ox : offsets) {
          double const x = 2.0 * (double(c) + ox) / double(w) - 1.0;
          double const y = 2.0 * (double(r) + oy) / double(h) - 1.0;
          double v = 0.0;
          for (auto const& e : ellipses) {
            if (e.contains(x, y)) v += e.intensity;
          }
          acc += v;
        }
      }
      img(r, c) = std::clamp(acc / 4.0, 0.0, 1.0);
    }
  }
  return img;
}

} // namespace detail

/// Smooth complex coil profiles: Gaussians centred on a ring outside the field of view
/// with slowly varying phase, normalized to unit RSS at every pixel.
inline SensitivityMaps make_coil_maps(std::size_t h, std::size_t w, std::size_t coils, std::uint64_t seed)
{
  detail::PhantomRng rng(seed ^ 0xc01150000ULL);
  SensitivityMaps maps(coils, h, w);
  for (std::size_t k = 0; k < coils; ++k) {
    double const angle = 2.0 * std::numbers::pi * double(k) / double(coils) + rng.uniform(-0.1, 0.1);
    double const cx = 1.3 * std::cos(angle);
    double const cy = 1.3 * std::sin(angle);
    double const width = rng.uniform(0.8, 1.0);
    double const phase0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
    double const slope = rng.uniform(0.3, 0.8);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        double const x = 2.0 * (double(c) + 0.5) / double(w) - 1.0;
        double const y = 2.0 * (double(r) + 0.5) / double(h) - 1.0;
        double const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        double const mag = std::exp(-d2 / (2.0 * width * width));
        double const phase = phase0 + slope * (x * std::cos(angle) + y * std::sin(angle));
        maps(k, r, c) = std::polar(mag, phase);
      }
    }
  }
  std::size_t const n = maps.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < coils; ++k) s += std::norm(maps[k * n + i]);
    double const inv = 1.0 / std::sqrt(s);
    for (std::size_t k = 0; k < coils; ++k) maps[k * n + i] *= inv;
  }
  return maps;
}

/// Deterministic phantom frames in [0,1] plus ground-truth coil maps.
inline Phantom make_phantom(PhantomSpec const& spec)
{
  spec.validate();
  detail::PhantomRng rng(spec.seed);
  Phantom out;
  std::vector<Ellipse> base = spec.kind == PhantomKind::shepp_logan ? detail::shepp_logan_ellipses()
                                                                    : detail::cardiac_ellipses(0.0);
  // Seeded jitter of the inner structures; the outer boundary stays fixed.
  struct Jitter
  {
    double dx, dy, sa, sb;
  };
  std::vector<Jitter> jitter;
  for (std::size_t i = 0; i < base.size(); ++i) {
    jitter.push_back({rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), rng.uniform(0.97, 1.03),
                      rng.uniform(0.97, 1.03)});
  }
  for (std::size_t f = 0; f < spec.frames; ++f) {
    double const contraction =
      spec.kind == PhantomKind::cardiac && spec.frames > 1 ? std::sin(std::numbers::pi * double(f) / double(spec.frames)) : 0.0;
    std::vector<Ellipse> es = spec.kind == PhantomKind::shepp_logan ? base : detail::cardiac_ellipses(contraction);
    for (std::size_t i = 1; i < es.size(); ++i) {
      es[i].x0 += jitter[i].dx;
      es[i].y0 += jitter[i].dy;
      es[i].a *= jitter[i].sa;
      es[i].b *= jitter[i].sb;
    }
    out.frames.push_back(detail::rasterize(es, spec.height, spec.width));
  }
  out.maps = make_coil_maps(spec.height, spec.width, spec.coils, spec.seed);
  out.support = Grid<std::uint8_t>(spec.height, spec.width);
  for (std::size_t i = 0; i < out.support.size(); ++i) out.support[i] = out.frames[0][i] > 0.0 ? 1 : 0;
  return out;
}

/// k_c = fft2c(S_c * img).
inline MultiCoilKSpace simulate_kspace(ComplexImage const& img, SensitivityMaps const& maps)
{
  return fft2c_coils(sense_expand(img, maps));
}

inline MultiCoilKSpace simulate_kspace(RealImage const& img, SensitivityMaps const& maps)
{
  return simulate_kspace(to_complex(img), maps);
}

} // namespace ksplab
