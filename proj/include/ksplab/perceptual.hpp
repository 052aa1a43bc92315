#pragma once

#include "array.hpp"

#include <cstdint>
#include <memory>
#include <random>

namespace ksplab {

/// Multi-channel feature map, one plane per channel.
using FeatureMap = Stack<double>;

/// A fixed feature extractor with an exact vector-Jacobian product, used by the
/// perceptual loss. Implementations must be stateless across calls.
class FeatureExtractor
{
public:
  virtual ~FeatureExtractor() = default;

  /// Activations of every layer that contributes to the loss.
  virtual std::vector<FeatureMap> forward(RealImage const& img) const = 0;

  /// Given dL/d(features[l]) for every layer, returns dL/d(img).
  virtual RealImage backward(RealImage const& img, std::vector<FeatureMap> const& feature_grads) const = 0;
};

enum class Activation { identity, tanh };

/// 3x3 "same" correlation (zero padding) from in_channels to out_channels, plus bias,
/// followed by a pointwise activation.
struct ConvLayer
{
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  /// Layout [out][in][3][3].
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::tanh;

  double w(std::size_t o, std::size_t i, int dr, int dc) const
  {
    return weights[((o * in_channels + i) * 3 + std::size_t(dr + 1)) * 3 + std::size_t(dc + 1)];
  }

  void validate() const
  {
    if (weights.size() != in_channels * out_channels * 9 || bias.size() != out_channels) {
      throw std::invalid_argument("ConvLayer: parameter sizes do not match channel counts");
    }
  }
};

/// Sequential stack of ConvLayer; every layer's activation is a loss feature.
class ConvStackExtractor final : public FeatureExtractor
{
public:
  explicit ConvStackExtractor(std::vector<ConvLayer> layers) : layers_(std::move(layers))
  {
    if (layers_.empty()) throw std::invalid_argument("ConvStackExtractor: need at least one layer");
    std::size_t ch = 1;
    for (auto const& l : layers_) {
      l.validate();
      if (l.in_channels != ch) throw std::invalid_argument("ConvStackExtractor: channel chain broken");
      ch = l.out_channels;
    }
  }

  /// Two tanh layers (1->4->4 channels) with weights drawn from a seeded generator.
  static ConvStackExtractor reference(std::uint64_t seed = 20240917)
  {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng] { return double(rng() >> 11) * 0x1.0p-53; };
    auto make = [&](std::size_t in, std::size_t out) {
      ConvLayer l{in, out, std::vector<double>(in * out * 9), std::vector<double>(out), Activation::tanh};
      double const bound = std::sqrt(3.0 / double(in * 9));
      for (auto& v : l.weights) v = (2.0 * uniform() - 1.0) * bound;
      for (auto& v : l.bias) v = (2.0 * uniform() - 1.0) * 0.1;
      return l;
    };
    return ConvStackExtractor({make(1, 4), make(4, 4)});
  }

  /// One identity layer: features equal the input image.
  static ConvStackExtractor identity()
  {
    ConvLayer l{1, 1, std::vector<double>(9, 0.0), {0.0}, Activation::identity};
    l.weights[4] = 1.0;
    return ConvStackExtractor({l});
  }

  std::vector<ConvLayer> const& layers() const noexcept { return layers_; }

  std::vector<FeatureMap> forward(RealImage const& img) const override
  {
    std::vector<FeatureMap> acts;
    FeatureMap cur(1, img.height(), img.width(), img.values());
    for (auto const& l : layers_) {
      FeatureMap pre = conv(l, cur);
      for (auto& v : pre.values()) v = activate(l.activation, v);
      acts.push_back(pre);
      cur = std::move(pre);
    }
    return acts;
  }

  RealImage backward(RealImage const& img, std::vector<FeatureMap> const& feature_grads) const override
  {
    if (feature_grads.size() != layers_.size()) {
      throw std::invalid_argument("ConvStackExtractor::backward: one gradient per layer required");
    }
    // Recompute pre-activations.
    std::vector<FeatureMap> inputs;
    std::vector<FeatureMap> pres;
    FeatureMap cur(1, img.height(), img.width(), img.values());
    for (auto const& l : layers_) {
      inputs.push_back(cur);
      FeatureMap pre = conv(l, cur);
      pres.push_back(pre);
      for (auto& v : pre.values()) v = activate(l.activation, v);
      cur = std::move(pre);
    }

    FeatureMap carry;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      auto const& l = layers_[li];
      FeatureMap ga = feature_grads[li];
      if (carry.size() == ga.size()) {
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += carry[i];
      }
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= activate_derivative(l.activation, pres[li][i]);
      carry = conv_adjoint(l, ga);
    }
    return RealImage(img.height(), img.width(), carry.values());
  }

private:
  static double activate(Activation a, double v) { return a == Activation::tanh ? std::tanh(v) : v; }

  static double activate_derivative(Activation a, double pre)
  {
    if (a == Activation::identity) return 1.0;
    double const t = std::tanh(pre);
    return 1.0 - t * t;
  }

  static FeatureMap conv(ConvLayer const& l, FeatureMap const& in)
  {
    std::size_t const h = in.height();
    std::size_t const w = in.width();
    FeatureMap out(l.out_channels, h, w);
    for (std::size_t o = 0; o < l.out_channels; ++o) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          double acc = l.bias[o];
          for (std::size_t i = 0; i < l.in_channels; ++i) {
            for (int dr = -1; dr <= 1; ++dr) {
              std::ptrdiff_t const rr = std::ptrdiff_t(r) + dr;
              if (rr < 0 || rr >= std::ptrdiff_t(h)) continue;
              for (int dc = -1; dc <= 1; ++dc) {
                std::ptrdiff_t const cc = std::ptrdiff_t(c) + dc;
                if (cc < 0 || cc >= std::ptrdiff_t(w)) continue;
                acc += l.w(o, i, dr, dc) * in(i, std::size_t(rr), std::size_t(cc));
              }
            }
          }
          out(o, r, c) = acc;
        }
      }
    }
    return out;
  }

  static FeatureMap conv_adjoint(ConvLayer const& l, FeatureMap const& grad_out)
  {
    std::size_t const h = grad_out.height();
    std::size_t const w = grad_out.width();
    FeatureMap out(l.in_channels, h, w);
    for (std::size_t o = 0; o < l.out_channels; ++o) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          double const g = grad_out(o, r, c);
          if (g == 0.0) continue;
          for (std::size_t i = 0; i < l.in_channels; ++i) {
            for (int dr = -1; dr <= 1; ++dr) {
              std::ptrdiff_t const rr = std::ptrdiff_t(r) + dr;
              if (rr < 0 || rr >= std::ptrdiff_t(h)) continue;
              for (int dc = -1; dc <= 1; ++dc) {
                std::ptrdiff_t const cc = std::ptrdiff_t(c) + dc;
                if (cc < 0 || cc >= std::ptrdiff_t(w)) continue;
                out(i, std::size_t(rr), std::size_t(cc)) += l.w(o, i, dr, dc) * g;
              }
            }
          }
        }
      }
    }
    return out;
  }

  std::vector<ConvLayer> layers_;
};

} // namespace ksplab
