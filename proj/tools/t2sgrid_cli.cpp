// Command-line driver: gridify -> run -> evaluate, plus token estimation, dataset export
// and a synthetic marker corpus for offline checks.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "t2sgrid/error.hpp"
#include "t2sgrid/log.hpp"
#include "t2sgrid/pipeline.hpp"
#include "t2sgrid/synthetic.hpp"

using namespace t2sgrid;
using nlohmann::json;

namespace {

struct Flags {
  std::string unit = "frames";
  std::optional<double> fps;
  std::optional<int> frames;
  std::optional<double> native_fps;
  std::string dataset = "none";
  std::string backend = "mock";
  std::string iou;
  bool quiet = false;
};

void add_shared(CLI::App* cmd, RunConfig& run, Flags& flags) {
  cmd->add_option("--grid", run.grid_spec, "grid layout and stride, e.g. g43_s12")->capture_default_str();
  cmd->add_option("--gutter", run.gutter_px, "black pixels between cells")->capture_default_str();
  cmd->add_option("--unit", flags.unit, "timestamp unit: frames|seconds")->capture_default_str();
  auto* fps = cmd->add_option("--fps", flags.fps, "resample frames to this rate");
  cmd->add_option("--frames", flags.frames, "resample to this many frames")->excludes(fps);
  cmd->add_option("--native-fps", flags.native_fps, "frame rate for directories without meta.json");
  cmd->add_option("--frames-root", run.frames_root, "directory holding <video_id>/%06d.png");
  cmd->add_option("--dataset", flags.dataset, "none|charades|activitynet")->capture_default_str();
  cmd->add_option("--annotations", run.annotations, "annotation file for --dataset");
  cmd->add_option("--out", run.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--manifest", run.manifest, "grid manifest (default <out>/grids/manifest.jsonl)");
  cmd->add_option("--predictions", run.predictions, "predictions file (default <out>/predictions.jsonl)");
  cmd->add_option("--backend", flags.backend, "mock|http")->capture_default_str();
  cmd->add_option("--seed", run.seed, "seed for jitter and synthetic fixtures")->capture_default_str();
  cmd->add_option("--concurrency", run.concurrency, "worker threads / in-flight requests")->capture_default_str();
  cmd->add_flag("-q,--quiet", flags.quiet, "only print warnings and errors");
}

void finish(RunConfig& run, const Flags& flags) {
  run.unit = parse_time_unit(flags.unit);
  run.sample_fps = flags.fps;
  run.sample_count = flags.frames;
  run.native_fps = flags.native_fps;
  run.dataset = parse_dataset_kind(flags.dataset);
  run.backend = parse_backend_kind(flags.backend);
  run.backend_config.max_concurrent = run.concurrency;
  run.backend_config.seed = run.seed;
  if (!flags.iou.empty()) {
    run.thresholds.clear();
    std::string item;
    std::stringstream ss(flags.iou);
    while (std::getline(ss, item, ',')) {
      try {
        run.thresholds.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw Error(Errc::kConfigError, "bad --iou value '" + item + "'");
      }
    }
  }
  if (flags.quiet) log::set_level(log::Level::kWarn);
}

void print_report(const EvalReport& report) {
  std::printf("samples: %zu  failed parses: %zu\n", report.n, report.n_failed_parse);
  for (const auto& [m, rate] : report.recall_at) {
    std::printf("R@%s: %.2f\n", threshold_key(m).c_str(), 100.0 * rate);
  }
  std::printf("mIoU: %.2f\n", 100.0 * report.miou);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sliding-window frame gridification and temporal grounding toolkit"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags win)");
  app.require_subcommand(1);

  RunConfig run;
  Flags flags;

  auto* gridify = app.add_subcommand("gridify", "compose grid images and the grid manifest");
  add_shared(gridify, run, flags);

  auto* run_cmd = app.add_subcommand("run", "query a backend for every annotated sample");
  add_shared(run_cmd, run, flags);
  run_cmd->add_option("--endpoint", run.backend_config.endpoint_url, "chat-completions URL");
  run_cmd->add_option("--model", run.backend_config.model_name, "model name sent to the backend");
  run_cmd->add_option("--auth-env", run.backend_config.auth_token_env, "env var holding the bearer token")
      ->capture_default_str();
  run_cmd->add_option("--timeout", run.backend_config.timeout_s, "per-request timeout in seconds")
      ->capture_default_str();
  run_cmd->add_option("--retries", run.backend_config.retries, "retries on transient failures")
      ->capture_default_str();
  run_cmd->add_option("--temperature", run.backend_config.temperature)->capture_default_str();
  run_cmd->add_option("--max-tokens", run.backend_config.max_tokens)->capture_default_str();
  run_cmd->add_option("--failure-budget", run.failure_budget, "backend failures tolerated before aborting")
      ->capture_default_str();
  std::string system_prompt;
  run_cmd->add_option("--system", system_prompt, "optional system prompt");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against annotations");
  add_shared(evaluate_cmd, run, flags);
  evaluate_cmd->add_option("--iou", flags.iou, "comma-separated IoU thresholds (default 0.3,0.5,0.7)");

  auto* tokens_cmd = app.add_subcommand("estimate-tokens", "visual/text token budget from the grid manifest");
  add_shared(tokens_cmd, run, flags);
  tokens_cmd->add_option("--merge-px", run.tokenizer.merge_px, "pixels per merged visual token side")
      ->capture_default_str();
  tokens_cmd->add_option("--overhead", run.tokenizer.overhead, "constant tokens per image")->capture_default_str();

  auto* emit_cmd = app.add_subcommand("emit-dataset", "write instruction-tuning records as JSON lines");
  add_shared(emit_cmd, run, flags);

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic marker corpus (Charades-STA format)");
  CorpusOptions corpus;
  std::string synth_root = "synthetic";
  synth_cmd->add_option("--root", synth_root, "output directory")->capture_default_str();
  synth_cmd->add_option("--videos", corpus.videos)->capture_default_str();
  synth_cmd->add_option("--min-frames", corpus.min_frames)->capture_default_str();
  synth_cmd->add_option("--max-frames", corpus.max_frames)->capture_default_str();
  synth_cmd->add_option("--width", corpus.resolution.width)->capture_default_str();
  synth_cmd->add_option("--height", corpus.resolution.height)->capture_default_str();
  synth_cmd->add_option("--native-fps", corpus.fps)->capture_default_str();
  synth_cmd->add_option("--seed", corpus.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      const SyntheticCorpus c = write_marker_corpus(synth_root, corpus);
      std::printf("frames: %s\nannotations: %s\nvideos: %zu\n", c.frames_root.c_str(), c.annotations.c_str(),
                  c.videos.size());
      return 0;
    }
    finish(run, flags);
    if (!system_prompt.empty()) run.system_prompt = system_prompt;

    if (*gridify) {
      const GridifyResult r = cmd_gridify(run);
      std::printf("grids: %zu\nmanifest: %s\n", r.records.size(), run.manifest_path().c_str());
    } else if (*run_cmd) {
      const RunSummary s = cmd_run(run);
      std::printf("requested: %zu  skipped (already done): %zu  failed: %zu\npredictions: %s\n", s.requested,
                  s.skipped_existing, s.failed, run.predictions_path().c_str());
    } else if (*evaluate_cmd) {
      const EvalReport report = cmd_evaluate(run);
      print_report(report);
      std::printf("%s\n", report_to_json(report).dump().c_str());
    } else if (*tokens_cmd) {
      const TokenReport report = cmd_estimate_tokens(run);
      for (const auto& [vid, b] : report.per_video) {
        std::printf("%s: grids=%zu visual=%lld text=%lld total=%lld\n", vid.c_str(), b.per_grid_tokens.size(),
                    b.total_visual_tokens, b.text_tokens_estimate, b.grand_total);
      }
      std::printf("mToken: %.1f\n", report.mean_tokens);
    } else if (*emit_cmd) {
      const auto records = cmd_emit_dataset(run);
      std::printf("records: %zu\ndataset: %s\n", records.size(), (run.out_dir / "dataset.jsonl").c_str());
    }
  } catch (const Error& e) {
    log::error(e.what());
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    log::error(e.what());
    return 3;
  } catch (const std::exception& e) {
    log::error(e.what());
    return 1;
  }
  return 0;
}
