#include "t2sgrid/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>

#include "t2sgrid/log.hpp"
#include "t2sgrid/parallel.hpp"
#include "t2sgrid/prompt.hpp"

namespace t2sgrid {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "none" || text.empty()) return DatasetKind::kNone;
  if (text == "charades" || text == "charades-sta") return DatasetKind::kCharadesSta;
  if (text == "activitynet" || text == "activitynet-captions") return DatasetKind::kActivityNet;
  throw Error(Errc::kConfigError, "unknown dataset kind '" + std::string(text) + "'");
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "mock") return BackendKind::kMock;
  if (text == "http") return BackendKind::kHttp;
  throw Error(Errc::kConfigError, "unknown backend '" + std::string(text) + "'");
}

GridConfig RunConfig::grid() const {
  GridConfig g = parse_grid_config(grid_spec);
  g.gutter_px = gutter_px;
  g.validate();
  return g;
}

fs::path RunConfig::manifest_path() const {
  return manifest.empty() ? grid_root() / "manifest.jsonl" : manifest;
}

fs::path RunConfig::predictions_path() const {
  return predictions.empty() ? out_dir / "predictions.jsonl" : predictions;
}

void RunConfig::validate() const {
  try {
    (void)grid();
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, std::string("--grid: ") + e.what());
  }
  if (sample_fps && sample_count) throw Error(Errc::kConfigError, "--fps and --frames are exclusive");
  if (sample_fps && !(*sample_fps > 0.0)) throw Error(Errc::kConfigError, "--fps must be > 0");
  if (sample_count && *sample_count <= 0) throw Error(Errc::kConfigError, "--frames must be > 0");
  if (native_fps && !(*native_fps > 0.0)) throw Error(Errc::kConfigError, "--native-fps must be > 0");
  if (concurrency < 1) throw Error(Errc::kConfigError, "--concurrency must be >= 1");
  if (failure_budget < 0) throw Error(Errc::kConfigError, "--failure-budget must be >= 0");
  if (dataset != DatasetKind::kNone && !annotations.empty() && !fs::exists(annotations)) {
    throw Error(Errc::kIoError, "annotations not found: " + annotations.string());
  }
  if (!frames_root.empty() && !fs::is_directory(frames_root)) {
    throw Error(Errc::kIoError, "frames root not found: " + frames_root.string());
  }
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kConfigError:
    case Errc::kParseError:
    case Errc::kInvalidStride:
    case Errc::kInvalidTarget:
    case Errc::kInvalidModel:
      return 2;
    case Errc::kIoError:
    case Errc::kNoFrames:
    case Errc::kDecodeError:
    case Errc::kMissingVideo:
    case Errc::kSchemaError:
    case Errc::kResolutionMismatch:
      return 3;
    case Errc::kBackendError:
    case Errc::kTimeoutError:
      return 4;
    default:
      return 1;
  }
}

void write_timeline(const fs::path& path, const Timeline& timeline) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << json{{"video_id", timeline.video_id}, {"sample_fps", timeline.sample_fps}, {"times", timeline.times}}.dump()
      << '\n';
}

Timeline read_timeline(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string());
  try {
    const json j = json::parse(in);
    return {j.at("video_id").get<std::string>(), j.at("times").get<std::vector<double>>(),
            j.at("sample_fps").get<double>()};
  } catch (const json::exception& e) {
    throw Error(Errc::kSchemaError, path.string() + ": " + e.what());
  }
}

std::vector<GroundingSample> load_samples(const RunConfig& run) {
  switch (run.dataset) {
    case DatasetKind::kCharadesSta: {
      LoadStats stats;
      auto samples = load_charades_sta(run.annotations, {}, &stats);
      if (stats.skipped) log::warn(std::to_string(stats.skipped) + " malformed annotation line(s) skipped");
      return samples;
    }
    case DatasetKind::kActivityNet:
      return load_activitynet_captions(run.annotations);
    case DatasetKind::kNone:
      break;
  }
  throw Error(Errc::kConfigError, "this command needs --dataset and --annotations");
}

namespace {

std::vector<std::string> video_ids_for(const RunConfig& run) {
  std::set<std::string> ids;
  if (run.dataset != DatasetKind::kNone) {
    for (const auto& s : load_samples(run)) ids.insert(s.video_id);
  } else {
    if (run.frames_root.empty()) throw Error(Errc::kConfigError, "--frames-root is required");
    for (const auto& entry : fs::directory_iterator(run.frames_root)) {
      if (entry.is_directory()) ids.insert(entry.path().filename().string());
    }
  }
  return {ids.begin(), ids.end()};
}

FrameSequence load_and_sample(const RunConfig& run, const std::string& video_id) {
  const fs::path dir = run.frames_root / video_id;
  if (!fs::is_directory(dir)) throw Error(Errc::kMissingVideo, video_id + " (no directory " + dir.string() + ")");
  FrameSequence seq;
  try {
    seq = load_frame_directory(dir, run.native_fps);
  } catch (const Error& e) {
    throw Error(e.code(), video_id + ": " + e.what());
  }
  if (run.sample_count) return sample_uniform(seq, CountTarget{*run.sample_count});
  if (run.sample_fps) return sample_uniform(seq, FpsTarget{*run.sample_fps});
  return seq;
}

}  // namespace

GridifyResult cmd_gridify(const RunConfig& run) {
  run.validate();
  if (run.frames_root.empty()) throw Error(Errc::kConfigError, "--frames-root is required");
  const GridConfig config = run.grid();
  const auto ids = video_ids_for(run);

  std::vector<std::vector<GridRecord>> per_video(ids.size());
  std::vector<Timeline> timelines(ids.size());
  parallel_for(ids.size(), run.concurrency, [&](std::size_t i) {
    const FrameSequence seq = load_and_sample(run, ids[i]);
    const fs::path dir = run.grid_root() / ids[i];
    fs::create_directories(dir);
    for (const GridImage& grid : compose_all(seq, config)) {
      const fs::path path = grid_image_path(run.grid_root(), ids[i], grid.plan.window_index);
      write_image(grid.image, path);
      per_video[i].push_back(make_record(grid, ids[i], path.string()));
    }
    timelines[i] = Timeline::of(seq);
    write_timeline(dir / kTimelineFileName, timelines[i]);
  });

  GridifyResult result;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    result.records.insert(result.records.end(), per_video[i].begin(), per_video[i].end());
    result.timelines.emplace(ids[i], std::move(timelines[i]));
  }
  write_manifest(run.manifest_path(), result.records);
  log::info("gridified " + std::to_string(ids.size()) + " video(s) into " + std::to_string(result.records.size()) +
            " grid(s) with " + config.to_string());
  return result;
}

void to_json(json& j, const PredictionRecord& r) {
  j = json{{"id", r.id}, {"video_id", r.video_id}, {"reply_text", r.reply_text}, {"latency_s", r.latency_s}};
  if (r.raw) {
    j["parsed"] = {{"start", r.raw->start}, {"end", r.raw->end}, {"unit", to_string(r.raw->unit)}};
  } else {
    j["parsed"] = nullptr;
  }
  if (r.seconds) {
    j["pred_start_s"] = r.seconds->start;
    j["pred_end_s"] = r.seconds->end;
  } else {
    j["pred_start_s"] = nullptr;
    j["pred_end_s"] = nullptr;
  }
}

void from_json(const json& j, PredictionRecord& r) {
  j.at("id").get_to(r.id);
  r.video_id = j.value("video_id", "");
  r.reply_text = j.value("reply_text", "");
  r.latency_s = j.value("latency_s", 0.0);
  r.raw.reset();
  r.seconds.reset();
  if (j.contains("parsed") && j["parsed"].is_object()) {
    const json& p = j["parsed"];
    r.raw = TemporalInterval{p.at("start").get<double>(), p.at("end").get<double>(),
                             parse_time_unit(p.at("unit").get<std::string>())};
  }
  if (j.contains("pred_start_s") && j["pred_start_s"].is_number() && j["pred_end_s"].is_number()) {
    r.seconds = TemporalInterval{j["pred_start_s"].get<double>(), j["pred_end_s"].get<double>(), TimeUnit::kSeconds};
  }
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::vector<PredictionRecord> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<PredictionRecord>());
    } catch (const json::exception& e) {
      log::warn(path.string() + ":" + std::to_string(line_no) + ": unreadable prediction skipped (" + e.what() + ")");
    }
  }
  return out;
}

namespace {

void write_predictions_sorted(const fs::path& path, std::vector<PredictionRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(Errc::kIoError, "cannot write " + tmp.string());
    for (const auto& r : records) out << json(r).dump() << '\n';
  }
  fs::rename(tmp, path);
}

std::string file_safe(std::string id) {
  for (char& c : id) {
    if (c == '#' || c == '/' || c == '\\') c = '_';
  }
  return id;
}

}  // namespace

RunSummary cmd_run(const RunConfig& run, Backend* backend_override) {
  run.validate();
  if (!fs::exists(run.manifest_path())) {
    log::info("no grid manifest at " + run.manifest_path().string() + "; gridifying first");
    cmd_gridify(run);
  }
  std::map<std::string, std::vector<GridRecord>> grids;
  for (GridRecord& r : read_manifest(run.manifest_path())) grids[r.video_id].push_back(std::move(r));

  const auto samples = load_samples(run);
  fs::create_directories(run.out_dir);
  const fs::path pred_path = run.predictions_path();
  std::vector<PredictionRecord> existing = read_predictions(pred_path);
  std::set<std::string> done;
  for (const auto& r : existing) done.insert(r.id);

  RunSummary summary;
  std::vector<const GroundingSample*> pending;
  for (const GroundingSample& s : samples) {
    if (done.count(s.id)) {
      ++summary.skipped_existing;
    } else {
      pending.push_back(&s);
    }
  }

  std::unique_ptr<Backend> owned;
  Backend* backend = backend_override;
  if (!backend) {
    if (run.backend == BackendKind::kMock) {
      owned = std::make_unique<MockBackend>();
    } else {
      BackendConfig cfg = run.backend_config;
      cfg.max_concurrent = std::max(cfg.max_concurrent, run.concurrency);
      if (cfg.seed == 0) cfg.seed = run.seed;
      if (cfg.audit_log.empty()) cfg.audit_log = run.out_dir / "requests.jsonl";
      owned = std::make_unique<HttpBackend>(cfg);
    }
    backend = owned.get();
  }

  const fs::path prompt_dir = run.out_dir / "prompts";
  fs::create_directories(prompt_dir);
  std::map<std::string, Timeline> timelines;
  for (const GroundingSample* s : pending) {
    if (timelines.count(s->video_id)) continue;
    const fs::path tl = run.grid_root() / s->video_id / kTimelineFileName;
    if (!grids.count(s->video_id) || !fs::exists(tl)) throw Error(Errc::kMissingVideo, s->video_id);
    timelines.emplace(s->video_id, read_timeline(tl));
  }

  std::mutex write_mutex;
  std::vector<PredictionRecord> fresh;
  std::size_t failures = 0;
  std::string first_failure;
  {
    std::ofstream append(pred_path, std::ios::app);
    if (!append) throw Error(Errc::kIoError, "cannot append to " + pred_path.string());
    parallel_for(pending.size(), run.concurrency, [&](std::size_t i) {
      const GroundingSample& s = *pending[i];
      {
        std::lock_guard<std::mutex> lock(write_mutex);
        if (failures > static_cast<std::size_t>(run.failure_budget)) return;
        summary.requested_ids.push_back(s.id);
      }
      PromptSequence prompt = assemble_interleaved(grids.at(s.video_id), run.unit, render_vtg_query(s.query, run.unit));
      prompt.system_text = run.system_prompt;
      {
        std::ofstream p(prompt_dir / (file_safe(s.id) + ".json"), std::ios::trunc);
        p << prompt_to_json(prompt).dump(2) << '\n';
      }
      ModelReply reply;
      try {
        reply = backend->send(prompt);
      } catch (const Error& e) {
        if (e.code() != Errc::kBackendError && e.code() != Errc::kTimeoutError) throw;
        std::lock_guard<std::mutex> lock(write_mutex);
        if (failures++ == 0) first_failure = e.what();
        log::warn(s.id + ": " + e.what());
        return;
      }
      PredictionRecord rec;
      rec.id = s.id;
      rec.video_id = s.video_id;
      rec.reply_text = reply.text;
      rec.latency_s = reply.latency_s;
      rec.raw = try_parse_grounding_answer(reply.text, run.unit);
      if (rec.raw) {
        rec.seconds = rec.raw->unit == TimeUnit::kFrames ? frames_to_seconds(*rec.raw, timelines.at(s.video_id))
                                                         : *rec.raw;
      }
      std::lock_guard<std::mutex> lock(write_mutex);
      append << json(rec).dump() << '\n' << std::flush;
      fresh.push_back(std::move(rec));
    });
  }

  std::sort(summary.requested_ids.begin(), summary.requested_ids.end());
  summary.requested = summary.requested_ids.size();
  summary.failed = failures;
  existing.insert(existing.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
  write_predictions_sorted(pred_path, std::move(existing));

  if (failures > static_cast<std::size_t>(run.failure_budget)) {
    throw Error(Errc::kBackendError, std::to_string(failures) + " backend failure(s) exceed budget " +
                                         std::to_string(run.failure_budget) + "; first: " + first_failure);
  }
  return summary;
}

EvalReport cmd_evaluate(const RunConfig& run) {
  run.validate();
  const auto samples = load_samples(run);
  PredictionMap predictions;
  for (const PredictionRecord& r : read_predictions(run.predictions_path())) predictions[r.id] = r.seconds;
  std::size_t missing = 0;
  for (const auto& s : samples) missing += predictions.count(s.id) ? 0 : 1;
  if (missing) log::warn(std::to_string(missing) + " sample(s) have no prediction; scored as failed parses");

  const EvalReport report = evaluate(samples, predictions, run.thresholds);
  fs::create_directories(run.out_dir);
  {
    std::ofstream out(run.out_dir / "report.json", std::ios::trunc);
    if (!out) throw Error(Errc::kIoError, "cannot write report");
    out << report_to_json(report).dump(2) << '\n';
  }
  write_per_sample_csv(run.out_dir / "per_sample.csv", report, samples, predictions);
  return report;
}

TokenReport cmd_estimate_tokens(const RunConfig& run) {
  const fs::path path = run.manifest_path();
  if (!fs::exists(path)) throw Error(Errc::kIoError, "grid manifest not found: " + path.string());
  std::map<std::string, std::vector<GridRecord>> by_video;
  for (GridRecord& r : read_manifest(path)) by_video[r.video_id].push_back(std::move(r));
  TokenReport report;
  double sum = 0.0;
  for (const auto& [vid, records] : by_video) {
    TokenBudget b = estimate_tokens(std::span<const GridRecord>(records), run.tokenizer, run.unit);
    sum += static_cast<double>(b.grand_total);
    report.per_video.emplace(vid, std::move(b));
  }
  report.mean_tokens = by_video.empty() ? 0.0 : sum / static_cast<double>(by_video.size());
  return report;
}

std::vector<InstructionRecord> cmd_emit_dataset(const RunConfig& run) {
  run.validate();
  const auto samples = load_samples(run);
  std::map<std::string, Timeline> timelines;
  bool gridified = false;
  for (const GroundingSample& s : samples) {
    if (timelines.count(s.video_id)) continue;
    const fs::path tl = run.grid_root() / s.video_id / kTimelineFileName;
    if (!fs::exists(tl) && !gridified) {
      cmd_gridify(run);
      gridified = true;
    }
    if (!fs::exists(tl)) throw Error(Errc::kMissingVideo, s.video_id);
    timelines.emplace(s.video_id, read_timeline(tl));
  }
  auto records = emit_instruction_dataset(samples, timelines, run.grid(), run.grid_root());
  fs::create_directories(run.out_dir);
  write_jsonl(run.out_dir / "dataset.jsonl", records);
  return records;
}

}  // namespace t2sgrid
