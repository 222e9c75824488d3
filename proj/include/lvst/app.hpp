#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvst/bilateral_grid.hpp"
#include "lvst/error.hpp"
#include "lvst/image_io.hpp"
#include "lvst/losses.hpp"
#include "lvst/pipeline.hpp"
#include "lvst/weights.hpp"

namespace lvst {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path content_dir;
  fs::path mask_dir;
  fs::path style_fg_path;
  fs::path style_bg_path;
  std::optional<fs::path> alt_style_fg_path;
  std::optional<fs::path> alt_style_bg_path;
  std::optional<fs::path> weights_path;
  std::optional<fs::path> flow_dir;
  fs::path out_dir;
  std::size_t grid_rate = 1;
  float alpha = 0.5f;
  std::size_t lowres_size = 256;
  std::vector<TransitionKey> transition_schedule;
  bool report_metrics = false;
  bool dump_grids = false;
  // Used to generate weights when no weight file is given.
  std::uint64_t seed = 42;

  StylizeOptions stylize_options() const {
    StylizeOptions o;
    o.grid_rate = grid_rate;
    o.alpha = alpha;
    o.lowres = lowres_size;
    o.transition = transition_schedule;
    o.keep_grid = dump_grids;
    o.keep_debug = report_metrics;
    return o;
  }
};

/// Sorted regular files with the given extension (case-sensitive).
inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  require(fs::is_directory(dir), ErrorCode::Config, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// `frame,weight` lines; blank lines, '#' comments and a non-numeric header are skipped.
inline std::vector<TransitionKey> parse_transition_csv(std::istream& in) {
  std::vector<TransitionKey> keys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }), line.end());
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::Config, "transition line " + std::to_string(lineno) + " lacks a comma");
    if (lineno == 1 && !std::isdigit(static_cast<unsigned char>(line[0]))) continue;
    try {
      std::size_t used = 0;
      const unsigned long frame = std::stoul(line.substr(0, comma), &used);
      require(used == comma, ErrorCode::Config, "bad frame index");
      const std::string w = line.substr(comma + 1);
      const float weight = std::stof(w, &used);
      require(used == w.size(), ErrorCode::Config, "bad weight");
      keys.push_back({frame, weight});
    } catch (const std::logic_error&) {
      fail(ErrorCode::Config, "transition line " + std::to_string(lineno) + " is not `frame,weight`");
    }
  }
  return keys;
}

inline std::vector<TransitionKey> load_transition_csv(const fs::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorCode::Config, "cannot read transition file " + path.string());
  return parse_transition_csv(f);
}

inline std::string frame_name(std::size_t index, const char* prefix = "frame_", const char* ext = ".png") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%06zu%s", prefix, index + 1, ext);
  return buf;
}

/// Loaded clip, weights and styles for one configured run.
class ClipSession {
 public:
  explicit ClipSession(const PipelineConfig& config) : config_(config) {
    validate(config.stylize_options());
    frames_ = list_files(config.content_dir, ".png");
    masks_ = list_files(config.mask_dir, ".png");
    require(!frames_.empty(), ErrorCode::MissingFrame, "no PNG frames in " + config.content_dir.string());
    require(frames_.size() == masks_.size(), ErrorCode::LengthMismatch,
            std::to_string(frames_.size()) + " frames but " + std::to_string(masks_.size()) + " masks");
    weights_ = config.weights_path ? load(*config.weights_path) : seeded_pipeline_weights(config.seed);
    stylizer_ = std::make_unique<Stylizer>(weights_, config.stylize_options());
    style_fg_ = read_png_rgb(config.style_fg_path);
    style_bg_ = read_png_rgb(config.style_bg_path);
    std::optional<Tensor> alt_fg, alt_bg;
    if (config.alt_style_fg_path) alt_fg = read_png_rgb(*config.alt_style_fg_path);
    if (config.alt_style_bg_path) alt_bg = read_png_rgb(*config.alt_style_bg_path);
    stylizer_->set_styles(style_fg_, style_bg_, alt_fg ? &*alt_fg : nullptr, alt_bg ? &*alt_bg : nullptr);
  }

  ClipSource source() const {
    return {frames_.size(), [this](std::size_t i) { return read_png_rgb(frames_.at(i)); },
            [this](std::size_t i) { return read_png_gray(masks_.at(i)); }};
  }

  Stylizer& stylizer() { return *stylizer_; }
  const WeightBundle& weights() const { return weights_; }
  std::size_t size() const { return frames_.size(); }

 private:
  PipelineConfig config_;
  std::vector<fs::path> frames_, masks_;
  WeightBundle weights_;
  std::unique_ptr<Stylizer> stylizer_;
  Tensor style_fg_, style_bg_;
};

/// Aggregated evaluation metrics of one run.
struct MetricsReport {
  std::size_t frames = 0;
  LossParts losses;
  double style_fg = 0.0;
  double style_bg = 0.0;
  double total = 0.0;
  TemporalError temporal;

  nlohmann::json to_json() const {
    return {{"frames", frames},
            {"losses",
             {{"content", losses.content},
              {"style", losses.style},
              {"style_fg", style_fg},
              {"style_bg", style_bg},
              {"laplacian", losses.reg},
              {"mask", losses.mask},
              {"guide", losses.guide},
              {"temporal", losses.temporal}}},
            {"total_loss", total},
            {"warping_error", temporal.warping_error()}};
  }
};

/// Accumulates per-frame losses over a stream of results. Flow i relates frame i to i-1.
class MetricsAccumulator {
 public:
  MetricsAccumulator(const Stylizer& stylizer, std::size_t lowres) : stylizer_(stylizer), lowres_(lowres) {}

  void add(const FrameResult& r, const Tensor& input, const Tensor& raw_mask, const FlowField* flow) {
    require(r.debug.has_value(), ErrorCode::Config, "metrics need debug outputs (keep_debug)");
    const auto& dbg = *r.debug;
    const FeatureExtractor& ex = stylizer_.extractor();
    const FeaturePyramid out = ex.extract(resize_bilinear(r.frame, lowres_, lowres_));
    const FeaturePyramid in = ex.extract(resize_bilinear(input, lowres_, lowres_));
    report_.losses.content += content_loss(out, in);
    const double sf = style_loss(out, stylizer_.style_pyramid_fg());
    const double sb = style_loss(out, stylizer_.style_pyramid_bg());
    report_.style_fg += sf;
    report_.style_bg += sb;
    report_.losses.style += sf + sb;
    report_.losses.reg += laplacian_reg(dbg.grid_fg, dbg.grid_bg);
    report_.losses.mask += mask_loss(dbg.guide, dbg.grid_mask, raw_mask);
    report_.losses.guide += guide_loss(dbg.guide, input);
    if (prev_output_) {
      require(flow != nullptr, ErrorCode::MissingFlow, "no flow for frame " + std::to_string(r.index));
      const Tensor vis = visibility_mask(input, *prev_input_, *flow);
      report_.temporal += temporal_term(r.frame, *prev_output_, *flow, vis);
    }
    prev_output_ = r.frame;
    prev_input_ = input;
    ++report_.frames;
  }

  MetricsReport finish(const LossWeights& w = {}) {
    report_.losses.temporal = report_.temporal.loss;
    report_.total = total_loss(report_.losses, w);
    return report_;
  }

 private:
  const Stylizer& stylizer_;
  std::size_t lowres_;
  MetricsReport report_;
  std::optional<Tensor> prev_output_, prev_input_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorCode::Io, "cannot write " + path.string());
  f << text;
}

struct RunSummary {
  std::vector<FrameResult> results;
  std::size_t grid_path_invocations = 0;
  std::optional<MetricsReport> metrics;
};

/// Stylizes the configured clip and writes frame_000001.png, ... into out_dir. With
/// dump_grids the blended grid of each frame goes to out_dir/grids/grid_000001.abg; with
/// report_metrics a metrics.json is written as well. Output frames are not kept in
/// memory unless keep_frames is set.
inline RunSummary run_pipeline(const PipelineConfig& config, bool keep_frames = false) {
  if (config.report_metrics)
    require(config.flow_dir.has_value(), ErrorCode::MissingFlow, "metrics requested without a flow directory");
  ClipSession session(config);
  std::vector<fs::path> flows;
  if (config.report_metrics) {
    flows = list_files(*config.flow_dir, ".flo");
    require(flows.size() + 1 == session.size(), ErrorCode::LengthMismatch,
            std::to_string(session.size()) + " frames need " + std::to_string(session.size() - 1) + " flows, found " +
                std::to_string(flows.size()));
  }
  fs::create_directories(config.out_dir);
  if (config.dump_grids) fs::create_directories(config.out_dir / "grids");

  const ClipSource clip = session.source();
  MetricsAccumulator metrics(session.stylizer(), config.lowres_size);
  RunSummary summary;
  session.stylizer().run(clip, [&](FrameResult&& r) {
    write_png(config.out_dir / frame_name(r.index), r.frame);
    if (r.grid) save_grid(*r.grid, config.out_dir / "grids" / frame_name(r.index, "grid_", ".abg"));
    if (config.report_metrics) {
      std::optional<FlowField> flow;
      if (r.index > 0) flow = read_flo(flows[r.index - 1]);
      metrics.add(r, clip.frame(r.index), clip.mask(r.index), flow ? &*flow : nullptr);
    }
    if (!keep_frames) r.frame = Tensor();
    r.debug.reset();
    summary.results.push_back(std::move(r));
  });
  summary.grid_path_invocations = session.stylizer().grid_path_invocations();
  if (config.report_metrics) {
    summary.metrics = metrics.finish();
    write_text(config.out_dir / "metrics.json", summary.metrics->to_json().dump(2) + "\n");
  }
  return summary;
}

/// Runs the pipeline with metrics on and returns the report (also written to
/// out_dir/metrics.json).
inline MetricsReport evaluate_metrics(PipelineConfig config) {
  config.report_metrics = true;
  return *run_pipeline(config).metrics;
}

/// Per-stage timing table over the configured clip at each square resolution; written
/// to out_dir/benchmark.csv.
inline std::vector<BenchmarkRow> benchmark(const PipelineConfig& config, const std::vector<std::size_t>& resolutions) {
  PipelineConfig cfg = config;
  cfg.report_metrics = false;
  cfg.dump_grids = false;
  ClipSession session(cfg);
  auto rows = benchmark_clip(session.stylizer(), session.source(), resolutions);
  fs::create_directories(config.out_dir);
  write_text(config.out_dir / "benchmark.csv", benchmark_csv(rows));
  return rows;
}

}  // namespace lvst
