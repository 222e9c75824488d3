#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lvst/error.hpp"

namespace lvst {

// Masked statistics below this total weight are rejected as an empty selection.
inline constexpr float kMaskEpsilon = 1e-6f;
// Added to the variance before taking the normalizing standard deviation.
inline constexpr float kVarianceEpsilon = 1e-5f;

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

/// Dense row-major float tensor. Images, masks and feature maps are rank 3 with
/// (height, width, channels) layout, channel fastest; conv kernels are rank 4
/// (kh, kw, in, out).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == count(shape_), ErrorCode::ShapeMismatch,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_str(shape_));
  }

  static Tensor image(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f) {
    return Tensor({h, w, c}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t height() const { return dim(0); }
  std::size_t width() const { return dim(1); }
  std::size_t channels() const { return dim(2); }
  std::size_t pixels() const { return height() * width(); }

  std::size_t dim(std::size_t i) const {
    if (i >= shape_.size())
      fail(ErrorCode::ShapeMismatch, "dimension " + std::to_string(i) + " of tensor " + shape_str(shape_));
    return shape_[i];
  }

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }

  float* pixel(std::size_t y, std::size_t x) { return data_.data() + (y * shape_[1] + x) * shape_[2]; }
  const float* pixel(std::size_t y, std::size_t x) const {
    return data_.data() + (y * shape_[1] + x) * shape_[2];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool operator==(const Tensor&) const = default;

  static std::size_t count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  Shape shape_;
  std::vector<float> data_;
};

inline void require_image(const Tensor& t, const char* what) {
  require(t.rank() == 3, ErrorCode::ShapeMismatch,
          std::string(what) + " must be HxWxC, got " + shape_str(t.shape()));
}

inline void require_same_spatial(const Tensor& a, const Tensor& b, const char* what) {
  require_image(a, what);
  require_image(b, what);
  require(a.height() == b.height() && a.width() == b.width(), ErrorCode::ShapeMismatch,
          std::string(what) + ": spatial dims " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

/// Per-channel mean and population variance.
struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> var;

  std::size_t channels() const noexcept { return mean.size(); }
  // Normalizing standard deviation, sqrt(var + eps).
  float stddev(std::size_t c) const { return std::sqrt(var[c] + kVarianceEpsilon); }

  bool operator==(const ChannelStats&) const = default;
};

namespace detail {

// Weighted two-pass statistics; a null mask means unit weight everywhere, which is
// the same arithmetic as an all-ones mask.
inline ChannelStats weighted_stats(const Tensor& x, const Tensor* m) {
  require_image(x, "statistics input");
  const std::size_t n = x.pixels();
  const std::size_t ch = x.channels();
  const float* xd = x.data().data();
  const float* md = m ? m->data().data() : nullptr;

  double total = 0.0;
  std::vector<double> sum(ch, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const double w = md ? md[p] : 1.0;
    total += w;
    const float* px = xd + p * ch;
    for (std::size_t c = 0; c < ch; ++c) sum[c] += static_cast<double>(px[c]) * w;
  }
  if (total < kMaskEpsilon) fail(ErrorCode::EmptyMask, "mask weight sums to " + std::to_string(total));

  std::vector<double> mean(ch);
  for (std::size_t c = 0; c < ch; ++c) mean[c] = sum[c] / total;

  std::vector<double> sq(ch, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const double w = md ? md[p] : 1.0;
    const float* px = xd + p * ch;
    for (std::size_t c = 0; c < ch; ++c) {
      const double d = static_cast<double>(px[c]) - mean[c];
      sq[c] += d * d * w;
    }
  }

  ChannelStats s;
  s.mean.resize(ch);
  s.var.resize(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    s.mean[c] = static_cast<float>(mean[c]);
    s.var[c] = static_cast<float>(std::max(0.0, sq[c] / total));
  }
  return s;
}

}  // namespace detail

inline ChannelStats channel_stats(const Tensor& x) { return detail::weighted_stats(x, nullptr); }

/// Statistics of x over the region weighted by m (H x W x 1, values in [0,1]).
inline ChannelStats masked_stats(const Tensor& x, const Tensor& m) {
  require_same_spatial(x, m, "masked_stats");
  require(m.channels() == 1, ErrorCode::ShapeMismatch, "mask must be single-channel");
  return detail::weighted_stats(x, &m);
}

/// Edge-clamped bilinear resampling with half-pixel-center alignment.
inline Tensor resize_bilinear(const Tensor& in, std::size_t out_h, std::size_t out_w) {
  require_image(in, "resize input");
  require(out_h >= 1 && out_w >= 1, ErrorCode::ShapeMismatch, "resize target must be at least 1x1");
  const std::size_t h = in.height(), w = in.width(), ch = in.channels();
  if (h == out_h && w == out_w) return in;

  struct Tap {
    std::size_t i0, i1;
    float f;
  };
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> t(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t i = 0; i < dst; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(src - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      const std::size_t i1 = std::min(i0 + 1, src - 1);
      t[i] = {i0, i1, static_cast<float>(s - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);

  Tensor out = Tensor::image(out_h, out_w, ch);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& b = tx[x];
      const float* p00 = in.pixel(a.i0, b.i0);
      const float* p01 = in.pixel(a.i0, b.i1);
      const float* p10 = in.pixel(a.i1, b.i0);
      const float* p11 = in.pixel(a.i1, b.i1);
      float* o = out.pixel(y, x);
      for (std::size_t c = 0; c < ch; ++c) {
        const float top = p00[c] + b.f * (p01[c] - p00[c]);
        const float bot = p10[c] + b.f * (p11[c] - p10[c]);
        o[c] = top + a.f * (bot - top);
      }
    }
  }
  return out;
}

/// Rec. 601 luma.
inline Tensor to_grayscale(const Tensor& rgb) {
  require_image(rgb, "grayscale input");
  require(rgb.channels() == 3, ErrorCode::ShapeMismatch, "grayscale needs 3 channels");
  Tensor out = Tensor::image(rgb.height(), rgb.width(), 1);
  const float* s = rgb.data().data();
  float* d = out.data().data();
  for (std::size_t p = 0; p < rgb.pixels(); ++p) {
    d[p] = 0.299f * s[3 * p] + 0.587f * s[3 * p + 1] + 0.114f * s[3 * p + 2];
  }
  return out;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_same_spatial(a, b, "concat_channels");
  const std::size_t ca = a.channels(), cb = b.channels();
  Tensor out = Tensor::image(a.height(), a.width(), ca + cb);
  for (std::size_t p = 0; p < a.pixels(); ++p) {
    std::copy_n(a.data().data() + p * ca, ca, out.data().data() + p * (ca + cb));
    std::copy_n(b.data().data() + p * cb, cb, out.data().data() + p * (ca + cb) + ca);
  }
  return out;
}

template <typename Fn>
Tensor map(const Tensor& t, Fn&& fn) {
  Tensor out = t;
  for (float& v : out.data()) v = fn(v);
  return out;
}

inline Tensor complement(const Tensor& m) {
  return map(m, [](float v) { return 1.0f - v; });
}

inline bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          "max_abs_diff " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace lvst
