#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksplab {

using cplx = std::complex<double>;

/// Row-major 2D array. The element at (row, col) lives at row * width + col.
template <class T>
class Grid
{
public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
    : height_(height), width_(width), data_(height * width, fill)
  {
  }
  Grid(std::size_t height, std::size_t width, std::vector<T> data)
    : height_(height), width_(width), data_(std::move(data))
  {
    if (data_.size() != height_ * width_) {
      throw std::invalid_argument("Grid: data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(height_) + "x" +
                                  std::to_string(width_));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * width_ + c]; }
  T const& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * width_ + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T const& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> span() noexcept { return data_; }
  std::span<T const> span() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  std::vector<T> const& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(Grid const& o) const noexcept { return height_ == o.height_ && width_ == o.width_; }

  friend bool operator==(Grid const&, Grid const&) = default;

private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

/// Coil-major stack of equally sized 2D arrays: element (c, r, x) at (c * H + r) * W + x.
template <class T>
class Stack
{
public:
  using value_type = T;

  Stack() = default;
  Stack(std::size_t count, std::size_t height, std::size_t width, T fill = T{})
    : count_(count), height_(height), width_(width), data_(count * height * width, fill)
  {
  }
  Stack(std::size_t count, std::size_t height, std::size_t width, std::vector<T> data)
    : count_(count), height_(height), width_(width), data_(std::move(data))
  {
    if (data_.size() != count_ * height_ * width_) {
      throw std::invalid_argument("Stack: data length does not match shape");
    }
  }

  std::size_t count() const noexcept { return count_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t c, std::size_t r, std::size_t x) noexcept
  {
    return data_[(c * height_ + r) * width_ + x];
  }
  T const& operator()(std::size_t c, std::size_t r, std::size_t x) const noexcept
  {
    return data_[(c * height_ + r) * width_ + x];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  T const& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> plane(std::size_t c) noexcept { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<T const> plane(std::size_t c) const noexcept
  {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  Grid<T> slice(std::size_t c) const
  {
    auto p = plane(c);
    return Grid<T>(height_, width_, std::vector<T>(p.begin(), p.end()));
  }
  void set_slice(std::size_t c, Grid<T> const& g)
  {
    if (g.height() != height_ || g.width() != width_) {
      throw std::invalid_argument("Stack::set_slice: shape mismatch");
    }
    std::copy(g.begin(), g.end(), plane(c).begin());
  }

  std::vector<T>& values() noexcept { return data_; }
  std::vector<T> const& values() const noexcept { return data_; }

  bool same_shape(Stack const& o) const noexcept
  {
    return count_ == o.count_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(Stack const&, Stack const&) = default;

private:
  std::size_t count_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

using ComplexImage = Grid<cplx>;
using RealImage = Grid<double>;
using MultiCoilKSpace = Stack<cplx>;
using CoilImages = Stack<cplx>;

/// Per-coil complex spatial weighting. Wherever the coil RSS is nonzero it equals 1.
struct SensitivityMaps : Stack<cplx>
{
  using Stack<cplx>::Stack;
  SensitivityMaps() = default;
  explicit SensitivityMaps(Stack<cplx> s) : Stack<cplx>(std::move(s)) {}
};

inline RealImage real_part(ComplexImage const& z)
{
  RealImage out(z.height(), z.width());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
  return out;
}

inline RealImage magnitude(ComplexImage const& z)
{
  RealImage out(z.height(), z.width());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::abs(z[i]);
  return out;
}

inline ComplexImage to_complex(RealImage const& x)
{
  ComplexImage out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  return out;
}

template <class T>
bool all_finite(std::span<T const> v)
{
  for (auto const& x : v) {
    if constexpr (std::is_same_v<T, cplx>) {
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    } else {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

/// Sum of squared moduli.
template <class Container>
double energy(Container const& c)
{
  double s = 0.0;
  for (auto const& v : c.values()) s += std::norm(v);
  return s;
}

} // namespace ksplab
