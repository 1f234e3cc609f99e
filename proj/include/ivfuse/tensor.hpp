/* SPDX-FileCopyrightText: 2026 the ivfuse authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ivfuse/errors.hpp"

namespace ivfuse {

/// Rank-4 real array in (batch, channel, row, column) order, row-major.
/// Values are stored as 32-bit floats; reductions inside the ops below
/// accumulate in double and round once on store.
class Tensor {
 public:
  Tensor() = default;

  Tensor(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w), data_(checked_count(n, c, h, w), 0.0f) {}

  static Tensor full(int n, int c, int h, int w, float value) {
    Tensor t(n, c, h, w);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  bool same_spatial(const Tensor& o) const {
    return n_ == o.n_ && h_ == o.h_ && w_ == o.w_;
  }

  std::size_t index(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * c_ + ch) * h_ + y) * w_ + x;
  }

  float at(int b, int ch, int y, int x) const { return data_[index(b, ch, y, x)]; }
  float& at(int b, int ch, int y, int x) { return data_[index(b, ch, y, x)]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool all_finite() const {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  static std::size_t checked_count(int n, int c, int h, int w) {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
      throw ShapeError("Tensor dimensions must be positive, got (" +
                       std::to_string(n) + "," + std::to_string(c) + "," +
                       std::to_string(h) + "," + std::to_string(w) + ")");
    }
    return static_cast<std::size_t>(n) * c * h * w;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<float> data_;
};

/// One 3x3 convolution: weights (out, in, 3, 3) row-major, per-output bias,
/// and an optional fused ReLU.
struct ConvLayer {
  static constexpr int kKernel = 3;

  int out_channels = 0;
  int in_channels = 0;
  bool apply_relu = true;
  std::vector<float> weights;
  std::vector<float> bias;

  ConvLayer(int out_c, int in_c, bool relu)
      : out_channels(out_c),
        in_channels(in_c),
        apply_relu(relu),
        weights(checked_weight_count(out_c, in_c), 0.0f),
        bias(static_cast<std::size_t>(out_c), 0.0f) {}

  ConvLayer(int out_c, int in_c, bool relu, std::vector<float> w, std::vector<float> b)
      : out_channels(out_c), in_channels(in_c), apply_relu(relu),
        weights(std::move(w)), bias(std::move(b)) {
    if (weights.size() != checked_weight_count(out_c, in_c)) {
      throw ShapeError("ConvLayer weight count does not match declared channels");
    }
    if (bias.size() != static_cast<std::size_t>(out_c)) {
      throw ShapeError("ConvLayer bias count does not match output channels");
    }
    for (float v : weights) {
      if (!std::isfinite(v)) throw NumericError("ConvLayer weights must be finite");
    }
    for (float v : bias) {
      if (!std::isfinite(v)) throw NumericError("ConvLayer bias must be finite");
    }
  }

  std::size_t weight_index(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * in_channels + i) * kKernel + ky) * kKernel + kx;
  }
  float weight_at(int o, int i, int ky, int kx) const {
    return weights[weight_index(o, i, ky, kx)];
  }

 private:
  static std::size_t checked_weight_count(int out_c, int in_c) {
    if (out_c < 1 || in_c < 1) {
      throw ShapeError("ConvLayer channel counts must be positive");
    }
    return static_cast<std::size_t>(out_c) * in_c * kKernel * kKernel;
  }
};

namespace detail {

/// Stride-1 same-padded 3x3 convolution without the activation.
/// Per output element the summation runs over (input channel, dy, dx) in
/// ascending order with a double accumulator, so results are bit-reproducible.
inline Tensor conv2d_raw(const Tensor& input, const ConvLayer& layer) {
  const int n = input.n(), h = input.h(), w = input.w();
  const int ci = layer.in_channels, co = layer.out_channels;
  Tensor out(n, co, h, w);

  std::vector<double> plane(static_cast<std::size_t>(h) * w);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < co; ++o) {
      std::fill(plane.begin(), plane.end(), static_cast<double>(layer.bias[o]));
      for (int i = 0; i < ci; ++i) {
        const float* in_plane = input.data().data() + input.index(b, i, 0, 0);
        for (int ky = 0; ky < 3; ++ky) {
          const int y0 = std::max(0, 1 - ky);
          const int y1 = std::min(h, h + 1 - ky);
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = layer.weight_at(o, i, ky, kx);
            const int x0 = std::max(0, 1 - kx);
            const int x1 = std::min(w, w + 1 - kx);
            const int xoff = kx - 1;
            for (int y = y0; y < y1; ++y) {
              const float* src = in_plane + static_cast<std::size_t>(y + ky - 1) * w;
              double* dst = plane.data() + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) {
                dst[x] += wv * src[x + xoff];
              }
            }
          }
        }
      }
      float* out_plane = out.data().data() + out.index(b, o, 0, 0);
      for (std::size_t k = 0; k < plane.size(); ++k) {
        out_plane[k] = static_cast<float>(plane[k]);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Elementwise max(0, x).
inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) {
    if (v < 0.0f) v = 0.0f;
  }
  return out;
}

/// Same-padded 3x3 convolution; applies ReLU when the layer asks for it.
inline Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  if (input.c() != layer.in_channels) {
    throw ShapeError("conv2d_forward: input has " + std::to_string(input.c()) +
                     " channels, layer expects " + std::to_string(layer.in_channels));
  }
  if (!input.all_finite()) {
    throw NumericError("conv2d_forward: input contains NaN or Inf");
  }
  Tensor out = detail::conv2d_raw(input, layer);
  if (layer.apply_relu) {
    for (float& v : out.data()) {
      if (v < 0.0f) v = 0.0f;
    }
  }
  return out;
}

/// Gradients of a scalar loss with respect to a convolution's input,
/// weights, and bias.
struct ConvGradients {
  Tensor input;
  std::vector<float> weights;
  std::vector<float> bias;
};

/// Backward pass of conv2d_forward. `grad_output` is the gradient w.r.t. the
/// layer output (post-activation when apply_relu is set; the pass gates it by
/// the recomputed pre-activation sign).
inline ConvGradients conv2d_backward(const Tensor& input, const ConvLayer& layer,
                                     const Tensor& grad_output) {
  if (input.c() != layer.in_channels) {
    throw ShapeError("conv2d_backward: input channel count mismatch");
  }
  if (grad_output.n() != input.n() || grad_output.c() != layer.out_channels ||
      grad_output.h() != input.h() || grad_output.w() != input.w()) {
    throw ShapeError("conv2d_backward: grad_output shape mismatch");
  }

  const int n = input.n(), h = input.h(), w = input.w();
  const int ci = layer.in_channels, co = layer.out_channels;

  Tensor gated = grad_output;
  if (layer.apply_relu) {
    const Tensor pre = detail::conv2d_raw(input, layer);
    for (std::size_t k = 0; k < gated.size(); ++k) {
      if (pre.data()[k] <= 0.0f) gated.data()[k] = 0.0f;
    }
  }

  ConvGradients grads{Tensor(n, ci, h, w),
                      std::vector<float>(layer.weights.size(), 0.0f),
                      std::vector<float>(layer.bias.size(), 0.0f)};

  // d/d bias
  for (int o = 0; o < co; ++o) {
    double acc = 0.0;
    for (int b = 0; b < n; ++b) {
      const float* g = gated.data().data() + gated.index(b, o, 0, 0);
      for (int k = 0; k < h * w; ++k) acc += g[k];
    }
    grads.bias[o] = static_cast<float>(acc);
  }

  // d/d weights: correlation of the gated upstream gradient with the input.
  for (int o = 0; o < co; ++o) {
    for (int i = 0; i < ci; ++i) {
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky);
        const int y1 = std::min(h, h + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(w, w + 1 - kx);
          const int xoff = kx - 1;
          double acc = 0.0;
          for (int b = 0; b < n; ++b) {
            const float* g = gated.data().data() + gated.index(b, o, 0, 0);
            const float* in_plane = input.data().data() + input.index(b, i, 0, 0);
            for (int y = y0; y < y1; ++y) {
              const float* grow = g + static_cast<std::size_t>(y) * w;
              const float* irow = in_plane + static_cast<std::size_t>(y + ky - 1) * w;
              for (int x = x0; x < x1; ++x) {
                acc += static_cast<double>(grow[x]) * irow[x + xoff];
              }
            }
          }
          grads.weights[layer.weight_index(o, i, ky, kx)] = static_cast<float>(acc);
        }
      }
    }
  }

  // d/d input: full correlation against the flipped kernel.
  std::vector<double> plane(static_cast<std::size_t>(h) * w);
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < ci; ++i) {
      std::fill(plane.begin(), plane.end(), 0.0);
      for (int o = 0; o < co; ++o) {
        const float* g = gated.data().data() + gated.index(b, o, 0, 0);
        for (int ky = 0; ky < 3; ++ky) {
          // input row y receives from output row y - ky + 1
          const int y0 = std::max(0, ky - 1);
          const int y1 = std::min(h, h + ky - 1);
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = layer.weight_at(o, i, ky, kx);
            const int x0 = std::max(0, kx - 1);
            const int x1 = std::min(w, w + kx - 1);
            const int xoff = -(kx - 1);
            for (int y = y0; y < y1; ++y) {
              const float* grow = g + static_cast<std::size_t>(y - ky + 1) * w;
              double* dst = plane.data() + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) {
                dst[x] += wv * grow[x + xoff];
              }
            }
          }
        }
      }
      float* out_plane = grads.input.data().data() + grads.input.index(b, i, 0, 0);
      for (std::size_t k = 0; k < plane.size(); ++k) {
        out_plane[k] = static_cast<float>(plane[k]);
      }
    }
  }
  return grads;
}

/// Stacks tensors along the channel axis, preserving part order.
inline Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) {
    throw std::invalid_argument("concat_channels: empty part list");
  }
  const Tensor& first = *parts[0];
  int total_c = 0;
  for (const Tensor* p : parts) {
    if (!p->same_spatial(first)) {
      throw ShapeError("concat_channels: parts disagree on batch or spatial dims");
    }
    total_c += p->c();
  }
  Tensor out(first.n(), total_c, first.h(), first.w());
  const std::size_t plane = static_cast<std::size_t>(first.h()) * first.w();
  for (int b = 0; b < first.n(); ++b) {
    std::size_t dst = out.index(b, 0, 0, 0);
    for (const Tensor* p : parts) {
      const std::size_t block = static_cast<std::size_t>(p->c()) * plane;
      std::copy_n(p->data().data() + p->index(b, 0, 0, 0), block, out.data().data() + dst);
      dst += block;
    }
  }
  return out;
}

inline Tensor concat_channels(std::initializer_list<const Tensor*> parts) {
  return concat_channels(std::span<const Tensor* const>(parts.begin(), parts.size()));
}

/// Inverse of concat_channels: splits along the channel axis at the given
/// channel counts. Round-trips bit-exactly.
inline std::vector<Tensor> split_channels(const Tensor& t, std::span<const int> sizes) {
  if (sizes.empty()) {
    throw std::invalid_argument("split_channels: empty size list");
  }
  int total = 0;
  for (int s : sizes) {
    if (s < 1) throw std::invalid_argument("split_channels: sizes must be positive");
    total += s;
  }
  if (total != t.c()) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) +
                     " but tensor has " + std::to_string(t.c()) + " channels");
  }
  std::vector<Tensor> parts;
  parts.reserve(sizes.size());
  const std::size_t plane = static_cast<std::size_t>(t.h()) * t.w();
  int offset = 0;
  for (int s : sizes) {
    Tensor part(t.n(), s, t.h(), t.w());
    for (int b = 0; b < t.n(); ++b) {
      std::copy_n(t.data().data() + t.index(b, offset, 0, 0),
                  static_cast<std::size_t>(s) * plane,
                  part.data().data() + part.index(b, 0, 0, 0));
    }
    offset += s;
    parts.push_back(std::move(part));
  }
  return parts;
}

inline std::vector<Tensor> split_channels(const Tensor& t, std::initializer_list<int> sizes) {
  return split_channels(t, std::span<const int>(sizes.begin(), sizes.size()));
}

}  // namespace ivfuse
