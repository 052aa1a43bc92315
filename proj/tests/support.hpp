#pragma once

#include <ksplab/ksplab.hpp>

#include <filesystem>
#include <numbers>
#include <random>

namespace ksplab::testing {

inline RealImage random_image(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  RealImage img(h, w);
  for (auto& v : img) v = d(rng);
  return img;
}

inline ComplexImage random_complex(std::size_t h, std::size_t w, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  ComplexImage img(h, w);
  for (auto& v : img) v = {d(rng), d(rng)};
  return img;
}

inline MultiCoilKSpace random_stack(std::size_t coils, std::size_t h, std::size_t w, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  MultiCoilKSpace s(coils, h, w);
  for (auto& v : s.values()) v = {d(rng), d(rng)};
  return s;
}

/// Direct O(N^2) centered orthonormal DFT, written from the definition.
inline ComplexImage naive_dft2c(ComplexImage const& x, int sign = -1)
{
  std::size_t const h = x.height();
  std::size_t const w = x.width();
  ComplexImage out(h, w);
  auto const ch = double(h / 2);
  auto const cw = double(w / 2);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      cplx acc{};
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          double const phase = double(sign) * 2.0 * std::numbers::pi *
                               ((double(u) - ch) * (double(r) - ch) / double(h) + (double(v) - cw) * (double(c) - cw) / double(w));
          acc += x(r, c) * std::polar(1.0, phase);
        }
      }
      out(u, v) = acc / std::sqrt(double(h * w));
    }
  }
  return out;
}

inline double max_abs_diff(ComplexImage const& a, ComplexImage const& b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(RealImage const& a, RealImage const& b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Explicit mirror-padded copy, built independently of reflect_index.
inline RealImage pad_reflect(RealImage const& x, std::size_t bottom, std::size_t right, std::size_t top = 0,
                      std::size_t left = 0)
{
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return std::size_t(i);
  };
  RealImage out(x.height() + top + bottom, x.width() + left + right);
  for (std::size_t r = 0; r < out.height(); ++r) {
    for (std::size_t c = 0; c < out.width(); ++c) {
      out(r, c) = x(mirror(long(r) - long(top), long(x.height())), mirror(long(c) - long(left), long(x.width())));
    }
  }
  return out;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(std::string const& name)
{
  auto dir = std::filesystem::temp_directory_path() / ("ksplab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Fixed phantom used across reconstruction tests.
struct Scene
{
  Phantom phantom;
  MultiCoilKSpace full;
  SamplingMask mask;
  MultiCoilKSpace measured;
};

inline Scene make_scene(std::size_t n, int R, std::uint64_t seed = 0, std::size_t coils = 10)
{
  PhantomSpec ps;
  ps.height = n;
  ps.width = n;
  ps.coils = coils;
  ps.seed = seed;
  Scene s{make_phantom(ps), {}, {}, {}};
  s.full = simulate_kspace(s.phantom.frames[0], s.phantom.maps);
  s.mask = make_uniform_mask(n, n, R, 16);
  s.measured = apply_mask(s.full, s.mask);
  return s;
}

} // namespace ksplab::testing
