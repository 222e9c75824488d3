#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lvst/error.hpp"
#include "lvst/parallel.hpp"
#include "lvst/tensor.hpp"

namespace lvst {

enum class Activation { None, Relu, Sigmoid };

inline float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

inline float activate(Activation a, float v) {
  switch (a) {
    case Activation::Relu: return v > 0.0f ? v : 0.0f;
    case Activation::Sigmoid: return sigmoid(v);
    case Activation::None: break;
  }
  return v;
}

struct ConvLayerSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 3;
  std::size_t stride = 1;
  Activation activation = Activation::None;

  Shape weight_shape() const { return {kernel_size, kernel_size, in_channels, out_channels}; }
  Shape bias_shape() const { return {out_channels}; }

  // Zero padding that keeps the size at stride 1 and gives ceil(n/2) at stride 2.
  std::size_t pad() const { return kernel_size / 2; }
  std::size_t out_size(std::size_t n) const { return (n + 2 * pad() - kernel_size) / stride + 1; }

  bool operator==(const ConvLayerSpec&) const = default;
};

inline void validate_spec(const ConvLayerSpec& spec) {
  require(spec.kernel_size == 1 || spec.kernel_size == 3, ErrorCode::ShapeMismatch,
          "kernel size must be 1 or 3, got " + std::to_string(spec.kernel_size));
  require(spec.stride == 1 || spec.stride == 2, ErrorCode::ShapeMismatch,
          "stride must be 1 or 2, got " + std::to_string(spec.stride));
  require(spec.in_channels > 0 && spec.out_channels > 0, ErrorCode::ShapeMismatch,
          "conv channel counts must be positive");
}

/// Cross-correlation with zero padding, then the layer's activation.
inline Tensor conv2d(const Tensor& input, const ConvLayerSpec& spec, const Tensor& weights,
                     std::span<const float> bias) {
  validate_spec(spec);
  require_image(input, "conv2d input");
  require(input.channels() == spec.in_channels, ErrorCode::ShapeMismatch,
          "conv2d input has " + std::to_string(input.channels()) + " channels, layer expects " +
              std::to_string(spec.in_channels));
  require(weights.shape() == spec.weight_shape(), ErrorCode::ShapeMismatch,
          "conv2d weight shape " + shape_str(weights.shape()) + ", expected " +
              shape_str(spec.weight_shape()));
  require(bias.size() == spec.out_channels, ErrorCode::ShapeMismatch, "conv2d bias length mismatch");
  require(input.height() >= spec.kernel_size && input.width() >= spec.kernel_size,
          ErrorCode::ShapeMismatch, "conv2d input smaller than kernel");

  const std::size_t h = input.height(), w = input.width();
  const std::size_t cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t k = spec.kernel_size, stride = spec.stride;
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad());
  const std::size_t oh = spec.out_size(h), ow = spec.out_size(w);

  Tensor out = Tensor::image(oh, ow, cout);
  const float* wd = weights.data().data();

  parallel_rows(oh, [&](std::size_t oy) {
    std::vector<float> acc(cout);
    for (std::size_t ox = 0; ox < ow; ++ox) {
      std::copy(bias.begin(), bias.end(), acc.begin());
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const float* src = input.pixel(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          const float* wk = wd + (ky * k + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const float v = src[ci];
            const float* wrow = wk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) acc[co] += v * wrow[co];
          }
        }
      }
      float* dst = out.pixel(oy, ox);
      for (std::size_t co = 0; co < cout; ++co) dst[co] = activate(spec.activation, acc[co]);
    }
  });
  return out;
}

/// A conv layer bound to its parameters.
struct ConvLayer {
  ConvLayerSpec spec;
  Tensor weights;
  std::vector<float> bias;

  Tensor operator()(const Tensor& in) const { return conv2d(in, spec, weights, bias); }
};

inline Tensor run_layers(const Tensor& input, const std::vector<ConvLayer>& layers) {
  Tensor x = input;
  for (const auto& l : layers) x = l(x);
  return x;
}

/// A chain of stride-1 linear convolutions (only the last may carry an activation)
/// collapsed into one wide kernel. Away from the border the collapsed kernel is exact;
/// the border ring, where intermediate zero padding differs from padding the input,
/// is evaluated layer by layer on narrow strips.
class FoldedConvChain {
 public:
  explicit FoldedConvChain(std::vector<ConvLayer> layers) : layers_(std::move(layers)) {
    require(!layers_.empty(), ErrorCode::ShapeMismatch, "empty conv chain");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& s = layers_[i].spec;
      validate_spec(s);
      require(s.stride == 1, ErrorCode::ShapeMismatch, "folded chains need stride 1");
      require(i + 1 == layers_.size() || s.activation == Activation::None, ErrorCode::ShapeMismatch,
              "only the last layer of a folded chain may have an activation");
      require(i == 0 || layers_[i - 1].spec.out_channels == s.in_channels, ErrorCode::ShapeMismatch,
              "conv chain channel mismatch");
    }
    fold();
  }

  std::size_t in_channels() const { return layers_.front().spec.in_channels; }
  std::size_t out_channels() const { return layers_.back().spec.out_channels; }
  std::size_t kernel_size() const { return ksize_; }

  Tensor operator()(const Tensor& input) const {
    require_image(input, "folded conv input");
    require(input.channels() == in_channels(), ErrorCode::ShapeMismatch, "folded conv channel mismatch");
    const std::size_t h = input.height(), w = input.width();
    // Outputs within `ring` of the border read intermediate padding.
    std::size_t ring = 0;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) ring += layers_[i].spec.pad();
    const std::size_t strip = ring + reach_;
    if (ring == 0) return interior(input, 0);
    if (h <= 2 * strip || w <= 2 * strip) return run_layers(input, layers_);

    Tensor out = interior(input, ring);
    const std::size_t cout = out_channels();
    auto paste = [&](const Tensor& part, std::size_t y0, std::size_t x0, std::size_t src_y0,
                     std::size_t src_x0, std::size_t rows, std::size_t cols) {
      for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = 0; x < cols; ++x)
          std::copy_n(part.pixel(src_y0 + y, src_x0 + x), cout, out.pixel(y0 + y, x0 + x));
    };
    // Top, bottom, left and right strips; corners are written twice with equal values.
    paste(run_layers(crop(input, 0, 0, strip, w), layers_), 0, 0, 0, 0, ring, w);
    paste(run_layers(crop(input, h - strip, 0, strip, w), layers_), h - ring, 0, strip - ring, 0, ring, w);
    paste(run_layers(crop(input, 0, 0, h, strip), layers_), 0, 0, 0, 0, h, ring);
    paste(run_layers(crop(input, 0, w - strip, h, strip), layers_), 0, w - ring, 0, strip - ring, h, ring);
    return out;
  }

 private:
  static Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t rows, std::size_t cols) {
    const std::size_t ch = t.channels();
    Tensor out = Tensor::image(rows, cols, ch);
    for (std::size_t y = 0; y < rows; ++y)
      std::copy_n(t.pixel(y0 + y, x0), cols * ch, out.pixel(y, 0));
    return out;
  }

  void fold() {
    // Compose kernels one layer at a time: K <- K (*) K_next, b <- b_next + sum(K_next) b.
    const auto& first = layers_.front();
    ksize_ = first.spec.kernel_size;
    kernel_.assign(first.weights.data().begin(), first.weights.data().end());
    bias_.assign(first.bias.begin(), first.bias.end());
    std::size_t cmid = first.spec.out_channels;
    const std::size_t cin = first.spec.in_channels;

    for (std::size_t li = 1; li < layers_.size(); ++li) {
      const auto& next = layers_[li];
      const std::size_t kb = next.spec.kernel_size, cout = next.spec.out_channels;
      const std::size_t ka = ksize_, kc = ka + kb - 1;
      const float* wb = next.weights.data().data();
      std::vector<double> composed(kc * kc * cin * cout, 0.0);
      for (std::size_t by = 0; by < kb; ++by)
        for (std::size_t bx = 0; bx < kb; ++bx)
          for (std::size_t ay = 0; ay < ka; ++ay)
            for (std::size_t ax = 0; ax < ka; ++ax)
              for (std::size_t ci = 0; ci < cin; ++ci)
                for (std::size_t m = 0; m < cmid; ++m) {
                  const double a = kernel_[((ay * ka + ax) * cin + ci) * cmid + m];
                  const float* brow = wb + ((by * kb + bx) * cmid + m) * cout;
                  double* dst = composed.data() + (((by + ay) * kc + (bx + ax)) * cin + ci) * cout;
                  for (std::size_t co = 0; co < cout; ++co) dst[co] += a * brow[co];
                }
      std::vector<double> nb(next.bias.begin(), next.bias.end());
      for (std::size_t t = 0; t < kb * kb; ++t)
        for (std::size_t m = 0; m < cmid; ++m)
          for (std::size_t co = 0; co < cout; ++co) nb[co] += static_cast<double>(wb[(t * cmid + m) * cout + co]) * bias_[m];

      kernel_.assign(composed.begin(), composed.end());
      bias_.assign(nb.begin(), nb.end());
      ksize_ = kc;
      cmid = cout;
    }
    reach_ = 0;
    for (const auto& l : layers_) reach_ += l.spec.pad();
  }

  Tensor interior(const Tensor& input, std::size_t ring) const {
    const std::size_t h = input.height(), w = input.width();
    const std::size_t cin = in_channels(), cout = out_channels();
    const auto half = static_cast<std::ptrdiff_t>(ksize_ / 2);
    const Activation act = layers_.back().spec.activation;
    Tensor out = Tensor::image(h, w, cout);
    if (h <= 2 * ring || w <= 2 * ring) return out;
    parallel_rows(h - 2 * ring, [&](std::size_t r) {
      const std::size_t y = r + ring;
      std::vector<float> acc(cout);
      const std::size_t span = ksize_ * cin;
      const bool rows_inside = y >= ksize_ / 2 && y + ksize_ / 2 < h;
      for (std::size_t x = ring; x < w - ring; ++x) {
        if (cout == 1 && rows_inside && x >= ksize_ / 2 && x + ksize_ / 2 < w) {
          // Single output channel away from the border: one contiguous dot product per kernel row.
          float s = static_cast<float>(bias_[0]);
          for (std::size_t ky = 0; ky < ksize_; ++ky) {
            const float* src = input.pixel(y + ky - ksize_ / 2, x - ksize_ / 2);
            const float* wk = kernel_.data() + ky * span;
            float row = 0.0f;
            for (std::size_t k = 0; k < span; ++k) row += src[k] * wk[k];
            s += row;
          }
          *out.pixel(y, x) = activate(act, s);
          continue;
        }
        for (std::size_t co = 0; co < cout; ++co) acc[co] = static_cast<float>(bias_[co]);
        for (std::size_t ky = 0; ky < ksize_; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - half;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < ksize_; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - half;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const float* src = input.pixel(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            const float* wk = kernel_.data() + (ky * ksize_ + kx) * cin * cout;
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t co = 0; co < cout; ++co) acc[co] += src[ci] * wk[ci * cout + co];
          }
        }
        float* dst = out.pixel(y, x);
        for (std::size_t co = 0; co < cout; ++co) dst[co] = activate(act, acc[co]);
      }
    });
    return out;
  }

  std::vector<ConvLayer> layers_;
  std::vector<float> kernel_;
  std::vector<double> bias_;
  std::size_t ksize_ = 1;
  std::size_t reach_ = 0;
};

}  // namespace lvst
