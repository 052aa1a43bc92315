#pragma once

#include "array.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <numbers>

namespace ksplab {
namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n)
{
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

/// In-place iterative radix-2 transform, unnormalized. sign = -1 forward, +1 inverse.
class Radix2
{
public:
  explicit Radix2(std::size_t n) : n_(n), rev_(n), twiddle_(n / 2)
  {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      rev_[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      double const a = -2.0 * std::numbers::pi * double(k) / double(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
  }

  void run(std::span<cplx> x, int sign) const
  {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      std::size_t const half = len / 2;
      std::size_t const stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          cplx const w = twiddle_[k * stride];
          double const wr = w.real();
          double const wi = sign > 0 ? -w.imag() : w.imag();
          cplx const u = x[start + k];
          cplx const b = x[start + k + half];
          // Expanded product; std::complex operator* carries NaN recovery we do not need.
          cplx const v{b.real() * wr - b.imag() * wi, b.real() * wi + b.imag() * wr};
          x[start + k] = u + v;
          x[start + k + half] = u - v;
        }
      }
    }
  }

  std::size_t size() const noexcept { return n_; }

private:
  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<cplx> twiddle_;
};

/// Unnormalized 1D DFT of arbitrary length: radix-2 directly, Bluestein's chirp-z otherwise.
class Plan1d
{
public:
  explicit Plan1d(std::size_t n) : n_(n)
  {
    if (is_pow2(n)) {
      radix_ = std::make_unique<Radix2>(n);
      return;
    }
    std::size_t const m = next_pow2(2 * n - 1);
    radix_ = std::make_unique<Radix2>(m);
    chirp_.resize(n);
    std::uint64_t const mod = 2 * std::uint64_t(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 reduced mod 2n keeps the chirp phase exact for large k
      std::uint64_t const k2 = (std::uint64_t(k) * std::uint64_t(k)) % mod;
      double const a = -std::numbers::pi * double(k2) / double(n);
      chirp_[k] = {std::cos(a), std::sin(a)};
    }
    kernel_.assign(m, cplx{});
    kernel_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      kernel_[k] = std::conj(chirp_[k]);
      kernel_[m - k] = std::conj(chirp_[k]);
    }
    radix_->run(kernel_, -1);
  }

  std::size_t size() const noexcept { return n_; }

  void run(std::span<cplx> x, int sign) const
  {
    if (chirp_.empty()) {
      radix_->run(x, sign);
      return;
    }
    // Inverse via conjugation symmetry: DFT+(x) = conj(DFT-(conj x)).
    std::size_t const m = radix_->size();
    std::vector<cplx> a(m, cplx{});
    for (std::size_t k = 0; k < n_; ++k) {
      cplx const v = sign > 0 ? std::conj(x[k]) : x[k];
      a[k] = v * chirp_[k];
    }
    radix_->run(a, -1);
    for (std::size_t k = 0; k < m; ++k) a[k] *= kernel_[k];
    radix_->run(a, +1);
    double const inv_m = 1.0 / double(m);
    for (std::size_t k = 0; k < n_; ++k) {
      cplx const v = a[k] * inv_m * chirp_[k];
      x[k] = sign > 0 ? std::conj(v) : v;
    }
  }

private:
  std::size_t n_;
  std::unique_ptr<Radix2> radix_;
  std::vector<cplx> chirp_;
  std::vector<cplx> kernel_;
};

inline Plan1d const& plan_for(std::size_t n)
{
  thread_local std::map<std::size_t, std::unique_ptr<Plan1d>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Plan1d>(n);
  return *slot;
}

/// Centered index c maps to standard DFT index (c - n/2) mod n.
inline std::size_t uncenter(std::size_t c, std::size_t n) { return (c + n - n / 2) % n; }

// Centered, orthonormal 2D transform: fftshift(DFT(ifftshift(x))) / sqrt(HW).
inline ComplexImage centered_transform(ComplexImage const& in, int sign)
{
  std::size_t const h = in.height();
  std::size_t const w = in.width();
  if (h == 0 || w == 0) {
    throw std::invalid_argument("fft2c: image dimensions must be at least 1x1");
  }
  ComplexImage work(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) work(uncenter(r, h), uncenter(c, w)) = in(r, c);
  }
  Plan1d const& row_plan = plan_for(w);
  for (std::size_t r = 0; r < h; ++r) {
    row_plan.run(std::span<cplx>(work.values().data() + r * w, w), sign);
  }
  Plan1d const& col_plan = plan_for(h);
  std::vector<cplx> column(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) column[r] = work(r, c);
    col_plan.run(column, sign);
    for (std::size_t r = 0; r < h; ++r) work(r, c) = column[r];
  }
  double const scale = 1.0 / std::sqrt(double(h * w));
  ComplexImage out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) out(r, c) = work(uncenter(r, h), uncenter(c, w)) * scale;
  }
  return out;
}

} // namespace detail

/// Centered orthonormal 2D DFT. DC lands at (H/2, W/2), rounded down for odd sizes.
inline ComplexImage fft2c(ComplexImage const& img) { return detail::centered_transform(img, -1); }

/// Exact inverse of fft2c under the same centering and 1/sqrt(HW) scaling.
inline ComplexImage ifft2c(ComplexImage const& ksp) { return detail::centered_transform(ksp, +1); }

inline ComplexImage fft2c(RealImage const& img) { return fft2c(to_complex(img)); }

} // namespace ksplab
