#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "lvst/bilateral_grid.hpp"
#include "lvst/error.hpp"
#include "lvst/feature_transfer.hpp"
#include "lvst/tensor.hpp"

namespace lvst {

struct LossWeights {
  double content = 0.2;
  double style = 1.0;
  double reg = 0.02;
  double mask = 5.0;
  double guide = 1.5;
  double temporal = 1000.0;
};

struct LossParts {
  double content = 0.0;
  double style = 0.0;
  double reg = 0.0;
  double mask = 0.0;
  double guide = 0.0;
  double temporal = 0.0;
};

inline double total_loss(const LossParts& p, const LossWeights& w = {}) {
  return w.content * p.content + w.style * p.style + w.reg * p.reg + w.mask * p.mask + w.guide * p.guide +
         w.temporal * p.temporal;
}

/// Sum over levels of squared Frobenius distances.
inline double content_loss(std::span<const Tensor> out, std::span<const Tensor> in) {
  require(out.size() == in.size(), ErrorCode::ShapeMismatch, "content_loss level counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(out[i].shape() == in[i].shape(), ErrorCode::ShapeMismatch,
            "content_loss level " + std::to_string(i) + " shapes differ");
    for (std::size_t k = 0; k < out[i].size(); ++k) {
      const double d = static_cast<double>(out[i][k]) - in[i][k];
      total += d * d;
    }
  }
  return total;
}

inline double content_loss(const FeaturePyramid& out, const FeaturePyramid& in) {
  return content_loss(std::span<const Tensor>(out.levels), std::span<const Tensor>(in.levels));
}

/// Squared distance between per-channel means plus squared distance between per-channel
/// standard deviations, summed over levels.
inline double style_loss(std::span<const Tensor> out, std::span<const Tensor> style) {
  require(out.size() == style.size(), ErrorCode::ShapeMismatch, "style_loss level counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    require_image(out[i], "style_loss level");
    require_image(style[i], "style_loss level");
    require(out[i].channels() == style[i].channels(), ErrorCode::ShapeMismatch,
            "style_loss level " + std::to_string(i) + " channel counts differ");
    const ChannelStats a = channel_stats(out[i]);
    const ChannelStats b = channel_stats(style[i]);
    for (std::size_t c = 0; c < a.channels(); ++c) {
      const double dm = static_cast<double>(a.mean[c]) - b.mean[c];
      const double ds = std::sqrt(static_cast<double>(a.var[c])) - std::sqrt(static_cast<double>(b.var[c]));
      total += dm * dm + ds * ds;
    }
  }
  return total;
}

inline double style_loss(const FeaturePyramid& out, const FeaturePyramid& style) {
  return style_loss(std::span<const Tensor>(out.levels), std::span<const Tensor>(style.levels));
}

namespace detail {
inline double sum_sq_diff(const Tensor& a, const Tensor& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    total += d * d;
  }
  return total;
}
}  // namespace detail

/// Squared L2 norm of slice(z, M_grid) - M_gt.
inline double mask_loss(const Tensor& z, const ScalarGrid& m_grid, const Tensor& m_gt) {
  require(z.shape() == m_gt.shape(), ErrorCode::ShapeMismatch, "mask_loss: guide and mask shapes differ");
  return detail::sum_sq_diff(slice_scalar(m_grid, z), m_gt);
}

/// Squared L2 norm of z - luma(image).
inline double guide_loss(const Tensor& z, const Tensor& image) {
  const Tensor gray = to_grayscale(image);
  require(z.shape() == gray.shape(), ErrorCode::ShapeMismatch, "guide_loss: guide and image sizes differ");
  return detail::sum_sq_diff(z, gray);
}

/// H x W x 2 displacements (dx, dy) in pixels from frame t to frame t-1.
using FlowField = Tensor;

/// Backward warp: out(x, y) = image(x + dx, y + dy), bilinear, edge-clamped.
inline Tensor warp(const Tensor& image, const FlowField& flow) {
  require_same_spatial(image, flow, "warp");
  require(flow.channels() == 2, ErrorCode::ShapeMismatch, "flow must have 2 channels");
  const std::size_t h = image.height(), w = image.width(), ch = image.channels();
  Tensor out = Tensor::image(h, w, ch);
  const float maxx = static_cast<float>(w - 1), maxy = static_cast<float>(h - 1);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const float* f = flow.pixel(y, x);
      const float sx = std::clamp(static_cast<float>(x) + f[0], 0.0f, maxx);
      const float sy = std::clamp(static_cast<float>(y) + f[1], 0.0f, maxy);
      const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const float fx = sx - static_cast<float>(x0), fy = sy - static_cast<float>(y0);
      const float *p00 = image.pixel(y0, x0), *p01 = image.pixel(y0, x1);
      const float *p10 = image.pixel(y1, x0), *p11 = image.pixel(y1, x1);
      float* o = out.pixel(y, x);
      for (std::size_t c = 0; c < ch; ++c) {
        const float top = p00[c] + fx * (p01[c] - p00[c]);
        const float bot = p10[c] + fx * (p11[c] - p10[c]);
        o[c] = top + fy * (bot - top);
      }
    }
  return out;
}

inline constexpr float kVisibilityThreshold = 0.05f;

/// 1 where the channel-mean absolute difference between I_t and the warped I_{t-1} is
/// at most tau.
inline Tensor visibility_mask(const Tensor& current, const Tensor& previous, const FlowField& flow,
                              float tau = kVisibilityThreshold) {
  require(current.shape() == previous.shape(), ErrorCode::ShapeMismatch, "visibility_mask: frame shapes differ");
  const Tensor warped = warp(previous, flow);
  const std::size_t ch = current.channels();
  Tensor v = Tensor::image(current.height(), current.width(), 1);
  for (std::size_t p = 0; p < current.pixels(); ++p) {
    float s = 0.0f;
    for (std::size_t c = 0; c < ch; ++c) s += std::abs(current[p * ch + c] - warped[p * ch + c]);
    v[p] = s / static_cast<float>(ch) <= tau ? 1.0f : 0.0f;
  }
  return v;
}

/// Accumulated flow-warping error. `loss` is the raw visibility-weighted L1 sum;
/// warping_error() divides by the visible sample count.
struct TemporalError {
  double loss = 0.0;
  double visible = 0.0;

  double warping_error() const { return visible > 0.0 ? loss / visible : 0.0; }

  TemporalError& operator+=(const TemporalError& o) {
    loss += o.loss;
    visible += o.visible;
    return *this;
  }
};

/// One frame pair: sum over pixels of V * |O_t - warp(O_{t-1})|_1.
inline TemporalError temporal_term(const Tensor& current, const Tensor& previous, const FlowField& flow,
                                   const Tensor& visibility) {
  require(current.shape() == previous.shape(), ErrorCode::ShapeMismatch, "temporal_term: frame shapes differ");
  require_same_spatial(current, visibility, "temporal_term visibility");
  const Tensor warped = warp(previous, flow);
  const std::size_t ch = current.channels();
  TemporalError e;
  for (std::size_t p = 0; p < current.pixels(); ++p) {
    const double v = visibility[p];
    if (v == 0.0) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < ch; ++c) s += std::abs(static_cast<double>(current[p * ch + c]) - warped[p * ch + c]);
    e.loss += v * s;
    e.visible += v * static_cast<double>(ch);
  }
  return e;
}

/// T frames, T-1 flows and visibilities (entry i relates frame i+1 to frame i).
inline TemporalError temporal_loss(std::span<const Tensor> frames, std::span<const FlowField> flows,
                                   std::span<const Tensor> visibilities) {
  require(!frames.empty() && flows.size() + 1 == frames.size() && visibilities.size() == flows.size(),
          ErrorCode::LengthMismatch,
          "temporal_loss needs T frames and T-1 flows/visibilities, got " + std::to_string(frames.size()) + ", " +
              std::to_string(flows.size()) + ", " + std::to_string(visibilities.size()));
  TemporalError total;
  for (std::size_t t = 1; t < frames.size(); ++t)
    total += temporal_term(frames[t], frames[t - 1], flows[t - 1], visibilities[t - 1]);
  return total;
}

inline constexpr float kFloMagic = 202021.25f;

/// Middlebury .flo: float 202021.25, int32 width, int32 height, then interleaved
/// (dx, dy) float pairs row by row, all little-endian.
inline FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot read " + path.string());
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
  };
  require(b.size() >= 12, ErrorCode::CorruptFile, path.string() + ": truncated flow header");
  require(std::bit_cast<float>(u32(0)) == kFloMagic, ErrorCode::CorruptFile, path.string() + ": bad flow magic");
  const auto w = static_cast<std::int32_t>(u32(4)), h = static_cast<std::int32_t>(u32(8));
  require(w > 0 && h > 0, ErrorCode::CorruptFile, path.string() + ": bad flow dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 2;
  require(b.size() == 12 + 4 * n, ErrorCode::CorruptFile, path.string() + ": flow payload size mismatch");
  FlowField flow = Tensor::image(static_cast<std::size_t>(h), static_cast<std::size_t>(w), 2);
  for (std::size_t i = 0; i < n; ++i) flow[i] = std::bit_cast<float>(u32(12 + 4 * i));
  return flow;
}

inline void write_flo(const FlowField& flow, const std::filesystem::path& path) {
  require(flow.rank() == 3 && flow.channels() == 2, ErrorCode::ShapeMismatch, "flow must be HxWx2");
  std::vector<unsigned char> b;
  auto put = [&b](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  put(std::bit_cast<std::uint32_t>(kFloMagic));
  put(static_cast<std::uint32_t>(flow.width()));
  put(static_cast<std::uint32_t>(flow.height()));
  for (float v : flow.data()) put(std::bit_cast<std::uint32_t>(v));
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace lvst
