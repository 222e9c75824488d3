// Command-line front end: stylize a PNG frame sequence, optionally report metrics or
// run the per-stage benchmark.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lvst/app.hpp"
#include "lvst/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::vector<std::size_t> parse_resolutions(const std::string& list) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string item = list.substr(start, comma - start);
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      lvst::require(used == item.size() && v >= 2, lvst::ErrorCode::Config, "bad resolution '" + item + "'");
      out.push_back(v);
    } catch (const std::logic_error&) {
      lvst::fail(lvst::ErrorCode::Config, "bad resolution '" + item + "'");
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized photorealistic video style transfer with affine bilateral grids"};
  lvst::PipelineConfig cfg;
  std::string content, masks, style_fg, style_bg, out, weights, flow, transition, bench, alt_fg, alt_bg,
      init_weights;
  bool metrics = false;
  unsigned threads = 0;

  app.add_option("--content", content, "Directory of frame PNGs (sorted by name)");
  app.add_option("--masks", masks, "Directory of single-channel mask PNGs, one per frame");
  app.add_option("--style-fg", style_fg, "Foreground style image");
  app.add_option("--style-bg", style_bg, "Background style image");
  app.add_option("--weights", weights, "Weight file; omitted means seeded weights from --seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--flow", flow, "Directory of .flo files, flow i maps frame i+1 to frame i");
  app.add_option("--grid-rate", cfg.grid_rate, "Predict grids every R frames")->check(CLI::PositiveNumber);
  app.add_option("--alpha", cfg.alpha, "Temporal statistics blend")->check(CLI::Range(0.0, 1.0));
  app.add_option("--lowres", cfg.lowres_size, "Grid-prediction resolution");
  app.add_option("--transition", transition, "CSV of frame,weight keys towards the alternate styles");
  app.add_option("--alt-style-fg", alt_fg, "Transition target for the foreground (default: background style)");
  app.add_option("--alt-style-bg", alt_bg, "Transition target for the background (default: foreground style)");
  app.add_flag("--metrics", metrics, "Write metrics.json (needs --flow)");
  app.add_option("--bench", bench, "Comma-separated square resolutions to benchmark");
  app.add_option("--seed", cfg.seed, "Seed for generated weights");
  app.add_flag("--dump-grids", cfg.dump_grids, "Write the blended grid of every frame");
  app.add_option("--threads", threads, "Worker threads (default: hardware concurrency)");
  app.add_option("--init-weights", init_weights, "Write seeded weights for --seed to FILE and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (threads > 0) lvst::set_thread_count(threads);
    if (!init_weights.empty()) {
      lvst::save(lvst::seeded_pipeline_weights(cfg.seed), init_weights);
      return 0;
    }
    for (const auto& [value, flag] : {std::pair{&content, "--content"}, {&masks, "--masks"},
                                      {&style_fg, "--style-fg"}, {&style_bg, "--style-bg"}, {&out, "--out"}})
      lvst::require(!value->empty(), lvst::ErrorCode::Config, std::string(flag) + " is required");
    cfg.content_dir = content;
    cfg.mask_dir = masks;
    cfg.style_fg_path = style_fg;
    cfg.style_bg_path = style_bg;
    cfg.out_dir = out;
    if (!weights.empty()) cfg.weights_path = weights;
    if (!flow.empty()) cfg.flow_dir = flow;
    if (!alt_fg.empty()) cfg.alt_style_fg_path = alt_fg;
    if (!alt_bg.empty()) cfg.alt_style_bg_path = alt_bg;
    if (!transition.empty()) cfg.transition_schedule = lvst::load_transition_csv(transition);
    cfg.report_metrics = metrics;

    if (!bench.empty()) {
      const auto rows = lvst::benchmark(cfg, parse_resolutions(bench));
      std::cout << lvst::benchmark_csv(rows);
      return 0;
    }
    const auto summary = lvst::run_pipeline(cfg);
    std::fprintf(stderr, "wrote %zu frames to %s (%zu grid-path runs)\n", summary.results.size(),
                 cfg.out_dir.string().c_str(), summary.grid_path_invocations);
    if (summary.metrics) std::cout << summary.metrics->to_json().dump(2) << "\n";
    return 0;
  } catch (const lvst::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(lvst::to_string(e.code())).c_str(), e.what());
    return e.is_config_error() ? kExitConfig : kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
