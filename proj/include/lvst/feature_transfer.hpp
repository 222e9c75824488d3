#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lvst/conv.hpp"
#include "lvst/error.hpp"
#include "lvst/tensor.hpp"
#include "lvst/weights.hpp"

namespace lvst {

/// Statistics carried from the previous frame of a stream for one transfer site.
struct TransferState {
  ChannelStats prev;
  bool valid = false;

  bool operator==(const TransferState&) const = default;
};

namespace detail {

inline void require_channels(const Tensor& x, const ChannelStats& s, const char* what) {
  require_image(x, what);
  require(x.channels() == s.channels(), ErrorCode::ChannelMismatch,
          std::string(what) + ": feature map has " + std::to_string(x.channels()) + " channels, statistics have " +
              std::to_string(s.channels()));
}

// Equal operands pass through unchanged so a static stream reproduces its single-frame
// statistics exactly for any alpha.
inline float blend_stat(float cur, float prev, float alpha) {
  return cur == prev ? cur : (1.0f - alpha) * cur + alpha * prev;
}

// sigma(y) * (x - mean) / std + mu(y); the target deviation carries no epsilon.
inline Tensor apply_transfer(const Tensor& x, std::span<const float> mean, std::span<const float> stddev,
                             const ChannelStats& target) {
  const std::size_t ch = x.channels();
  std::vector<float> scale(ch);
  for (std::size_t c = 0; c < ch; ++c) scale[c] = std::sqrt(target.var[c]) / stddev[c];
  Tensor out = x;
  float* d = out.data().data();
  for (std::size_t p = 0; p < x.pixels(); ++p)
    for (std::size_t c = 0; c < ch; ++c) {
      float& v = d[p * ch + c];
      v = (v - mean[c]) * scale[c] + target.mean[c];
    }
  return out;
}

inline Tensor transfer_with(const Tensor& x, const ChannelStats& cur, const TransferState& state,
                            const ChannelStats& y_stats, float alpha) {
  const std::size_t ch = cur.channels();
  std::vector<float> mean(ch), stddev(ch);
  const bool temporal = state.valid && alpha > 0.0f;
  if (temporal)
    require(state.prev.channels() == ch, ErrorCode::ChannelMismatch, "transfer state channel count differs");
  for (std::size_t c = 0; c < ch; ++c) {
    mean[c] = cur.mean[c];
    stddev[c] = cur.stddev(c);
    if (temporal) {
      mean[c] = blend_stat(mean[c], state.prev.mean[c], alpha);
      stddev[c] = blend_stat(stddev[c], state.prev.stddev(c), alpha);
    }
  }
  return apply_transfer(x, mean, stddev, y_stats);
}

}  // namespace detail

/// Adaptive instance normalization over the whole map.
inline Tensor adain(const Tensor& x, const ChannelStats& y_stats) {
  detail::require_channels(x, y_stats, "adain");
  return detail::transfer_with(x, channel_stats(x), {}, y_stats, 0.0f);
}

/// Statistics come from the region selected by m; every pixel is normalized.
inline Tensor sa_adain(const Tensor& x, const ChannelStats& y_stats, const Tensor& m) {
  detail::require_channels(x, y_stats, "sa_adain");
  return detail::transfer_with(x, masked_stats(x, m), {}, y_stats, 0.0f);
}

/// Mean and standard deviation blended with the previous frame's by alpha. An invalid
/// state (first frame) disables the blend.
inline std::pair<Tensor, TransferState> tc_adain(const Tensor& x, const TransferState& state,
                                                 const ChannelStats& y_stats, float alpha) {
  detail::require_channels(x, y_stats, "tc_adain");
  ChannelStats cur = channel_stats(x);
  Tensor out = detail::transfer_with(x, cur, state, y_stats, alpha);
  return {std::move(out), TransferState{std::move(cur), true}};
}

inline std::pair<Tensor, TransferState> st_adain(const Tensor& x, const TransferState& state,
                                                 const ChannelStats& y_stats, const Tensor& m, float alpha) {
  detail::require_channels(x, y_stats, "st_adain");
  ChannelStats cur = masked_stats(x, m);
  Tensor out = detail::transfer_with(x, cur, state, y_stats, alpha);
  return {std::move(out), TransferState{std::move(cur), true}};
}

/// Four feature maps at scales 1, 1/2, 1/4, 1/8 of one source image.
struct FeaturePyramid {
  std::array<Tensor, 4> levels;

  const Tensor& operator[](std::size_t i) const { return levels[i]; }
  Tensor& operator[](std::size_t i) { return levels[i]; }
};

inline void validate_pyramid(const FeaturePyramid& p) {
  for (std::size_t i = 0; i < 4; ++i) require_image(p[i], "pyramid level");
  for (std::size_t i = 1; i < 4; ++i) {
    const auto& a = p[i - 1];
    const auto& b = p[i];
    require(b.height() == (a.height() + 1) / 2 && b.width() == (a.width() + 1) / 2, ErrorCode::ShapeMismatch,
            "pyramid level " + std::to_string(i) + " does not halve level " + std::to_string(i - 1));
  }
}

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeaturePyramid extract(const Tensor& rgb) const = 0;
  virtual PyramidChannels channels() const = 0;
};

/// Four strided conv layers E1..E4 (stride 1, 2, 2, 2) standing in for a pretrained
/// backbone.
class TestExtractor final : public FeatureExtractor {
 public:
  explicit TestExtractor(const WeightBundle& weights, PyramidChannels channels = kTestExtractorChannels)
      : channels_(channels), layers_(weights.layers(Arch::TestExtractor, NetworkShape{channels, 8})) {}

  FeaturePyramid extract(const Tensor& rgb) const override {
    FeaturePyramid p;
    Tensor x = rgb;
    for (std::size_t i = 0; i < 4; ++i) {
      x = layers_[i](x);
      p[i] = x;
    }
    return p;
  }

  PyramidChannels channels() const override { return channels_; }

 private:
  PyramidChannels channels_;
  std::vector<ConvLayer> layers_;
};

/// Per-path stream state: one TransferState per splatting block.
using SplatState = std::array<TransferState, 3>;

/// Splatting blocks, L/F layers and the grid head.
///
/// Block b: the next pyramid level is concatenated onto both paths; S_b^1 (stride 2,
/// shared) runs on both; the content path goes through ST-AdaIN against the style
/// path's statistics, then S_b^2; S_b^3 (shared) closes both paths. After the third
/// block the last pyramid level is concatenated and L1 (stride 2), L2, F and the 1x1
/// grid head follow on the content path.
class SplatNetwork {
 public:
  SplatNetwork(const WeightBundle& weights, const NetworkShape& net) : net_(net) {
    auto table = layer_table(Arch::GridPath, net);
    for (const auto& [name, spec] : table) layers_.push_back(weights.layer(name, spec));
  }

  const NetworkShape& shape() const { return net_; }

  /// Runs the three splatting blocks and L/F; returns the 64-channel feature map at
  /// 1/16 of the pyramid's base resolution.
  std::pair<Tensor, SplatState> forward(const FeaturePyramid& content, const FeaturePyramid& style, const Tensor& mask,
                                        const SplatState& state, float alpha) const {
    validate_pyramid(content);
    validate_pyramid(style);
    require_same_spatial(content[0], mask, "splat mask");
    SplatState next;
    Tensor c, s;
    for (std::size_t b = 0; b < 3; ++b) {
      const ConvLayer& first = layers_[b * 3];
      const ConvLayer& middle = layers_[b * 3 + 1];
      const ConvLayer& last = layers_[b * 3 + 2];
      c = b == 0 ? content[0] : concat_channels(c, fit(content[b], c));
      s = b == 0 ? style[0] : concat_channels(s, fit(style[b], s));
      c = first(c);
      s = first(s);
      const ChannelStats style_stats = channel_stats(s);
      const Tensor m = resize_bilinear(mask, c.height(), c.width());
      auto [transferred, st] = st_adain(c, state[b], style_stats, m, alpha);
      next[b] = std::move(st);
      c = last(middle(transferred));
      s = last(s);
    }
    c = concat_channels(c, fit(content[3], c));
    for (std::size_t i = 9; i < 12; ++i) c = layers_[i](c);
    return {std::move(c), std::move(next)};
  }

  /// 1x1 conv to 12*D channels.
  Tensor head(const Tensor& features) const { return layers_[12](features); }

 private:
  static Tensor fit(const Tensor& t, const Tensor& like) { return resize_bilinear(t, like.height(), like.width()); }

  NetworkShape net_;
  std::vector<ConvLayer> layers_;
};

/// Free-function form of SplatNetwork::forward.
inline std::pair<Tensor, SplatState> splat_forward(const FeaturePyramid& content, const FeaturePyramid& style,
                                                   const Tensor& mask, const SplatState& state,
                                                   const WeightBundle& weights, float alpha,
                                                   const NetworkShape& net = {}) {
  return SplatNetwork(weights, net).forward(content, style, mask, state, alpha);
}

}  // namespace lvst
