#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "t2sgrid/error.hpp"
#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/gridify.hpp"
#include "t2sgrid/grounding_eval.hpp"
#include "t2sgrid/model_client.hpp"

namespace t2sgrid {

enum class DatasetKind { kNone, kCharadesSta, kActivityNet };
enum class BackendKind { kMock, kHttp };

DatasetKind parse_dataset_kind(std::string_view text);
BackendKind parse_backend_kind(std::string_view text);

struct RunConfig {
  std::string grid_spec = "g43_s12";
  int gutter_px = 0;
  TimeUnit unit = TimeUnit::kFrames;
  std::optional<double> sample_fps;    // resample to this rate
  std::optional<int> sample_count;     // or to this many frames
  std::optional<double> native_fps;    // frame rate of directories lacking meta.json

  DatasetKind dataset = DatasetKind::kNone;
  std::filesystem::path annotations;
  std::filesystem::path frames_root;
  std::filesystem::path out_dir = "t2sgrid_out";
  std::filesystem::path predictions;   // defaults to <out>/predictions.jsonl
  std::filesystem::path manifest;      // defaults to <out>/grids/manifest.jsonl

  BackendKind backend = BackendKind::kMock;
  BackendConfig backend_config;
  std::optional<std::string> system_prompt;
  int failure_budget = 0;

  std::vector<double> thresholds = kDefaultThresholds;
  TokenizerModel tokenizer;

  int concurrency = 1;
  std::uint64_t seed = 0;

  GridConfig grid() const;
  std::filesystem::path grid_root() const { return out_dir / "grids"; }
  std::filesystem::path manifest_path() const;
  std::filesystem::path predictions_path() const;
  void validate() const;
};

int exit_code_for(Errc code);

inline constexpr const char* kTimelineFileName = "timeline.json";

void write_timeline(const std::filesystem::path& path, const Timeline& timeline);
Timeline read_timeline(const std::filesystem::path& path);

std::vector<GroundingSample> load_samples(const RunConfig& run);

struct GridifyResult {
  std::vector<GridRecord> records;
  std::map<std::string, Timeline> timelines;
};

// Video ids come from the annotations when present, else every sub-directory of frames_root.
GridifyResult cmd_gridify(const RunConfig& run);

struct PredictionRecord {
  std::string id;
  std::string video_id;
  std::string reply_text;
  std::optional<TemporalInterval> raw;       // as parsed from the reply
  std::optional<TemporalInterval> seconds;   // after frame-to-time conversion
  double latency_s = 0.0;
};

void to_json(nlohmann::json& j, const PredictionRecord& r);
void from_json(const nlohmann::json& j, PredictionRecord& r);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

struct RunSummary {
  std::size_t requested = 0;
  std::size_t skipped_existing = 0;
  std::size_t failed = 0;
  std::vector<std::string> requested_ids;
};

RunSummary cmd_run(const RunConfig& run, Backend* backend_override = nullptr);

EvalReport cmd_evaluate(const RunConfig& run);

struct TokenReport {
  std::map<std::string, TokenBudget> per_video;
  double mean_tokens = 0.0;  // mToken: mean grand total per video
};

TokenReport cmd_estimate_tokens(const RunConfig& run);

std::vector<InstructionRecord> cmd_emit_dataset(const RunConfig& run);

}  // namespace t2sgrid
