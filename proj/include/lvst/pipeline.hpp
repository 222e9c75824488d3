#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lvst/bilateral_grid.hpp"
#include "lvst/error.hpp"
#include "lvst/feature_transfer.hpp"
#include "lvst/guidance.hpp"
#include "lvst/mask.hpp"
#include "lvst/tensor.hpp"
#include "lvst/weights.hpp"

namespace lvst {

inline constexpr std::array<const char*, 9> kStageNames{"downsample", "features", "mask_enhance", "guide",  "grid_fg",
                                                        "grid_bg",    "grid_mask", "blend",       "render"};

enum class Stage { Downsample, Features, MaskEnhance, Guide, GridFg, GridBg, GridMask, Blend, Render };

/// Wall time per stage in milliseconds.
struct StageTimings {
  std::array<double, 9> ms{};

  double& operator[](Stage s) { return ms[static_cast<std::size_t>(s)]; }
  double operator[](Stage s) const { return ms[static_cast<std::size_t>(s)]; }

  /// Stages that run at the low grid-prediction resolution.
  double grid_path() const {
    return (*this)[Stage::Downsample] + (*this)[Stage::Features] + (*this)[Stage::MaskEnhance] +
           (*this)[Stage::GridFg] + (*this)[Stage::GridBg] + (*this)[Stage::GridMask];
  }
  double total() const {
    double t = 0.0;
    for (double v : ms) t += v;
    return t;
  }
};

/// One point of a piecewise-linear style-transition schedule.
struct TransitionKey {
  std::size_t frame = 0;
  float weight = 0.0f;
};

/// Weight at `frame`, linear between keys and held constant beyond the ends.
inline float transition_weight(const std::vector<TransitionKey>& keys, std::size_t frame) {
  if (keys.empty()) return 0.0f;
  if (frame <= keys.front().frame) return keys.front().weight;
  if (frame >= keys.back().frame) return keys.back().weight;
  auto hi = std::upper_bound(keys.begin(), keys.end(), frame,
                             [](std::size_t f, const TransitionKey& k) { return f < k.frame; });
  auto lo = hi - 1;
  const float t = static_cast<float>(frame - lo->frame) / static_cast<float>(hi->frame - lo->frame);
  return lo->weight + t * (hi->weight - lo->weight);
}

struct StylizeOptions {
  std::size_t grid_rate = 1;
  float alpha = 0.5f;
  std::size_t lowres = 256;
  std::size_t grid_depth = 8;
  GridMaskVariant grid_mask = GridMaskVariant::Literal;
  std::vector<TransitionKey> transition;
  // Keep guide, soft grid mask and per-region grids in each FrameResult.
  bool keep_debug = false;
  bool keep_grid = false;
};

inline void validate(const StylizeOptions& o) {
  require(o.grid_rate >= 1, ErrorCode::Config, "grid rate must be at least 1");
  require(o.alpha >= 0.0f && o.alpha <= 1.0f, ErrorCode::Config, "alpha must lie in [0,1]");
  // The 1/16-scale layers need at least a 3x3 input.
  require(o.lowres >= 48 && o.lowres % 16 == 0, ErrorCode::Config,
          "low resolution must be a multiple of 16 and at least 48, got " + std::to_string(o.lowres));
  require(o.grid_depth >= 2, ErrorCode::Config, "grid depth must be at least 2");
  for (std::size_t i = 0; i < o.transition.size(); ++i) {
    require(o.transition[i].weight >= 0.0f && o.transition[i].weight <= 1.0f, ErrorCode::Config,
            "transition weights must lie in [0,1]");
    require(i == 0 || o.transition[i].frame > o.transition[i - 1].frame, ErrorCode::Config,
            "transition frames must be strictly increasing");
  }
}

struct FrameDebug {
  Tensor guide;
  ScalarGrid grid_mask;
  AffineBilateralGrid grid_fg;
  AffineBilateralGrid grid_bg;
};

struct FrameResult {
  std::size_t index = 0;
  bool keyframe = false;
  Tensor frame;
  StageTimings timings;
  std::optional<AffineBilateralGrid> grid;
  std::optional<FrameDebug> debug;
};

/// Random-access clip: frame(i) is H x W x 3 in [0,1], mask(i) is H x W x 1.
struct ClipSource {
  std::size_t count = 0;
  std::function<Tensor(std::size_t)> frame;
  std::function<Tensor(std::size_t)> mask;
};

inline ClipSource clip_from(const std::vector<Tensor>& frames, const std::vector<Tensor>& masks) {
  require(frames.size() == masks.size(), ErrorCode::LengthMismatch,
          std::to_string(frames.size()) + " frames but " + std::to_string(masks.size()) + " masks");
  return {frames.size(), [&frames](std::size_t i) { return frames[i]; },
          [&masks](std::size_t i) { return masks[i]; }};
}

using FrameSink = std::function<void(FrameResult&&)>;

/// Keyframe schedule for sub-sampling rate r: keyframes are multiples of r; other frames
/// interpolate at t = (i mod r) / r towards the next keyframe, or reuse the last one.
struct KeyframeSlot {
  std::size_t key = 0;
  std::optional<std::size_t> next;
  float t = 0.0f;
};

inline KeyframeSlot keyframe_slot(std::size_t frame, std::size_t rate, std::size_t count) {
  KeyframeSlot s;
  s.key = frame / rate * rate;
  const std::size_t offset = frame - s.key;
  if (offset != 0 && s.key + rate < count) {
    s.next = s.key + rate;
    s.t = static_cast<float>(offset) / static_cast<float>(rate);
  }
  return s;
}

inline std::size_t keyframe_count(std::size_t frames, std::size_t rate) { return (frames + rate - 1) / rate; }

/// Streaming stylizer for one clip. Frames must be fed in order; foreground and
/// background paths keep independent transfer states.
class Stylizer {
 public:
  Stylizer(const WeightBundle& weights, std::shared_ptr<const FeatureExtractor> extractor, StylizeOptions options)
      : options_(std::move(options)),
        extractor_(std::move(extractor)),
        net_{extractor_->channels(), options_.grid_depth},
        splat_(weights, net_),
        enhancer_(weights),
        guide_(weights) {
    validate(options_);
  }

  /// Seeded-test-extractor convenience constructor.
  Stylizer(const WeightBundle& weights, StylizeOptions options)
      : Stylizer(weights, std::make_shared<TestExtractor>(weights), std::move(options)) {}

  const StylizeOptions& options() const { return options_; }
  const FeatureExtractor& extractor() const { return *extractor_; }
  GridDims grid_dims() const { return {options_.lowres / 16, options_.lowres / 16, options_.grid_depth}; }

  /// Styles for the two regions; the alternates are the transition targets (defaults
  /// to the swapped pair).
  void set_styles(const Tensor& fg, const Tensor& bg, const Tensor* alt_fg = nullptr, const Tensor* alt_bg = nullptr) {
    style_fg_ = style_pyramid(fg);
    style_bg_ = style_pyramid(bg);
    alt_fg_ = alt_fg ? style_pyramid(*alt_fg) : style_bg_;
    alt_bg_ = alt_bg ? style_pyramid(*alt_bg) : style_fg_;
    has_styles_ = true;
  }

  const FeaturePyramid& style_pyramid_fg() const { return style_fg_; }
  const FeaturePyramid& style_pyramid_bg() const { return style_bg_; }

  std::size_t grid_path_invocations() const { return invocations_; }

  void run(const ClipSource& clip, const FrameSink& sink) {
    require(has_styles_, ErrorCode::Config, "styles not set");
    require(clip.count > 0, ErrorCode::MissingFrame, "clip has no frames");
    reset();
    for (std::size_t i = 0; i < clip.count; ++i) sink(process(clip, i));
  }

  std::vector<FrameResult> run(const ClipSource& clip) {
    std::vector<FrameResult> out;
    run(clip, [&out](FrameResult&& r) { out.push_back(std::move(r)); });
    return out;
  }

  std::vector<FrameResult> run(const std::vector<Tensor>& frames, const std::vector<Tensor>& masks) {
    return run(clip_from(frames, masks));
  }

 private:
  struct PathGrids {
    AffineBilateralGrid fg, bg;
  };
  struct KeyGrids {
    PathGrids main;
    std::optional<PathGrids> alt;
  };
  struct Streams {
    SplatState fg, bg;
  };

  using Clock = std::chrono::steady_clock;

  template <typename Fn>
  static auto timed(double& slot, Fn&& fn) {
    const auto start = Clock::now();
    auto r = fn();
    slot += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return r;
  }

  FeaturePyramid style_pyramid(const Tensor& style) const {
    require_image(style, "style image");
    require(style.channels() == 3, ErrorCode::ShapeMismatch, "style image must be RGB");
    return extractor_->extract(resize_bilinear(style, options_.lowres, options_.lowres));
  }

  void reset() {
    main_streams_ = {};
    alt_streams_ = {};
    keys_.clear();
    invocations_ = 0;
  }

  bool transitioning() const { return !options_.transition.empty(); }

  AffineBilateralGrid predict(const FeaturePyramid& content, const FeaturePyramid& style, const Tensor& mask,
                              SplatState& state) const {
    auto [features, next] = splat_.forward(content, style, mask, state, options_.alpha);
    state = std::move(next);
    return grid_from_head(splat_.head(features));
  }

  // Low-resolution frame and enhanced mask.
  std::pair<Tensor, Tensor> lowres_inputs(const Tensor& frame, const Tensor& mask, StageTimings& tm) const {
    const std::size_t lr = options_.lowres;
    auto [f, m] = timed(tm[Stage::Downsample], [&] {
      return std::make_pair(resize_bilinear(frame, lr, lr), resize_bilinear(mask, lr, lr));
    });
    Tensor enhanced = timed(tm[Stage::MaskEnhance], [&] { return enhancer_(m).values; });
    return {std::move(f), std::move(enhanced)};
  }

  void check_inputs(const Tensor& frame, const Tensor& mask, std::size_t index) const {
    require_image(frame, "frame");
    require(frame.channels() == 3, ErrorCode::ShapeMismatch, "frame " + std::to_string(index) + " is not RGB");
    require_image(mask, "mask");
    require(mask.channels() == 1 && mask.height() == frame.height() && mask.width() == frame.width(),
            ErrorCode::ShapeMismatch, "mask " + std::to_string(index) + " does not match its frame");
  }

  const KeyGrids& key_grids(const ClipSource& clip, std::size_t key, StageTimings& tm,
                            const std::pair<Tensor, Tensor>* lowres = nullptr) {
    if (auto it = keys_.find(key); it != keys_.end()) return it->second;
    // Keyframes are computed in increasing order, so transfer states advance in stream order.
    std::pair<Tensor, Tensor> own;
    if (!lowres) {
      const Tensor f = clip.frame(key);
      const Tensor m = clip.mask(key);
      check_inputs(f, m, key);
      own = lowres_inputs(f, m, tm);
      lowres = &own;
    }
    const auto& [frame_lr, mask_lr] = *lowres;
    const Tensor background = complement(mask_lr);
    try {
      const FeaturePyramid content = timed(tm[Stage::Features], [&] { return extractor_->extract(frame_lr); });
      KeyGrids g{
          {timed(tm[Stage::GridFg], [&] { return predict(content, style_fg_, mask_lr, main_streams_.fg); }),
           timed(tm[Stage::GridBg], [&] { return predict(content, style_bg_, background, main_streams_.bg); })},
          std::nullopt};
      if (transitioning()) {
        g.alt = PathGrids{
            timed(tm[Stage::GridFg], [&] { return predict(content, alt_fg_, mask_lr, alt_streams_.fg); }),
            timed(tm[Stage::GridBg], [&] { return predict(content, alt_bg_, background, alt_streams_.bg); })};
      }
      ++invocations_;
      // Only the current and the next keyframe are ever needed again.
      const std::size_t rate = options_.grid_rate;
      std::erase_if(keys_, [key, rate](const auto& kv) { return kv.first + rate < key; });
      return keys_.emplace(key, std::move(g)).first->second;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyMask) fail(ErrorCode::EmptyMask, "frame " + std::to_string(key) + ": " + e.what());
      throw;
    }
  }

  static PathGrids interpolate(const PathGrids& a, const PathGrids& b, float t) {
    return {lerp_grids(a.fg, b.fg, t), lerp_grids(a.bg, b.bg, t)};
  }

  FrameResult process(const ClipSource& clip, std::size_t i) {
    FrameResult r;
    r.index = i;
    StageTimings& tm = r.timings;
    const Tensor frame = clip.frame(i);
    const Tensor mask = clip.mask(i);
    check_inputs(frame, mask, i);

    const auto lowres = lowres_inputs(frame, mask, tm);
    const Tensor& mask_lr = lowres.second;

    const KeyframeSlot slot = keyframe_slot(i, options_.grid_rate, clip.count);
    r.keyframe = slot.key == i;
    const KeyGrids& key = key_grids(clip, slot.key, tm, r.keyframe ? &lowres : nullptr);
    PathGrids grids = key.main;
    std::optional<PathGrids> alt = key.alt;
    if (slot.next) {
      const KeyGrids& next = key_grids(clip, *slot.next, tm);
      const KeyGrids& cur = keys_.at(slot.key);
      grids = interpolate(cur.main, next.main, slot.t);
      if (cur.alt) alt = interpolate(*cur.alt, *next.alt, slot.t);
    }
    if (alt) {
      const float w = transition_weight(options_.transition, i);
      grids = {lerp_grids(grids.fg, alt->fg, w), lerp_grids(grids.bg, alt->bg, w)};
    }

    const Tensor guide = timed(tm[Stage::Guide], [&] {
      return guide_(frame, resize_bilinear(mask_lr, frame.height(), frame.width()));
    });
    ScalarGrid grid_mask = timed(tm[Stage::GridMask], [&] {
      const Tensor guide_lr = resize_bilinear(guide, options_.lowres, options_.lowres);
      return soft_grid_mask(guide_lr, mask_lr, grid_dims(), options_.grid_mask);
    });
    AffineBilateralGrid blended = timed(tm[Stage::Blend], [&] { return blend_grids(grids.fg, grids.bg, grid_mask); });
    r.frame = timed(tm[Stage::Render], [&] { return render(blended, frame, guide); });

    if (options_.keep_grid) r.grid = blended;
    if (options_.keep_debug) r.debug = FrameDebug{guide, std::move(grid_mask), std::move(grids.fg), std::move(grids.bg)};
    return r;
  }

  StylizeOptions options_;
  std::shared_ptr<const FeatureExtractor> extractor_;
  NetworkShape net_;
  SplatNetwork splat_;
  MaskEnhancer enhancer_;
  GuideNet guide_;

  FeaturePyramid style_fg_, style_bg_, alt_fg_, alt_bg_;
  bool has_styles_ = false;
  Streams main_streams_, alt_streams_;
  std::map<std::size_t, KeyGrids> keys_;
  std::size_t invocations_ = 0;
};

/// Mean and sample standard deviation of each stage over the measured frames.
struct BenchmarkRow {
  std::size_t resolution = 0;
  std::string stage;
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

inline constexpr std::size_t kBenchmarkWarmup = 3;
inline constexpr std::size_t kBenchmarkFrames = 20;

/// Runs `warmup + frames` frames of the clip (cycled, resized to res x res) at each
/// resolution and summarizes timings of the frames after the warm-up.
inline std::vector<BenchmarkRow> benchmark_clip(Stylizer& stylizer, const ClipSource& clip,
                                                const std::vector<std::size_t>& resolutions,
                                                std::size_t frames = kBenchmarkFrames,
                                                std::size_t warmup = kBenchmarkWarmup) {
  require(frames >= 1, ErrorCode::Config, "benchmark needs at least one measured frame");
  std::vector<BenchmarkRow> rows;
  for (std::size_t res : resolutions) {
    require(res >= 2, ErrorCode::Config, "benchmark resolution too small");
    ClipSource sized{warmup + frames,
                     [&clip, res](std::size_t i) { return resize_bilinear(clip.frame(i % clip.count), res, res); },
                     [&clip, res](std::size_t i) { return resize_bilinear(clip.mask(i % clip.count), res, res); }};
    std::vector<StageTimings> samples;
    stylizer.run(sized, [&](FrameResult&& r) {
      if (r.index >= warmup) samples.push_back(r.timings);
    });
    auto summarize = [&](const std::string& name, auto&& value) {
      double sum = 0.0;
      for (const auto& s : samples) sum += value(s);
      const double mean = sum / static_cast<double>(samples.size());
      double sq = 0.0;
      for (const auto& s : samples) sq += (value(s) - mean) * (value(s) - mean);
      const double sd = samples.size() > 1 ? std::sqrt(sq / static_cast<double>(samples.size() - 1)) : 0.0;
      rows.push_back({res, name, mean, sd});
    };
    for (std::size_t k = 0; k < kStageNames.size(); ++k)
      summarize(kStageNames[k], [k](const StageTimings& s) { return s.ms[k]; });
    summarize("grid_path", [](const StageTimings& s) { return s.grid_path(); });
    summarize("total", [](const StageTimings& s) { return s.total(); });
  }
  return rows;
}

inline std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out = "resolution,stage,mean_ms,std_ms\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.4f,%.4f\n", r.resolution, r.stage.c_str(), r.mean_ms, r.std_ms);
    out += buf;
  }
  return out;
}

}  // namespace lvst
