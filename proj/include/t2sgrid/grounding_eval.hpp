#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/gridify.hpp"

namespace t2sgrid {

struct TemporalInterval {
  double start = 0.0;
  double end = 0.0;
  TimeUnit unit = TimeUnit::kFrames;

  double length() const noexcept { return end - start; }
  friend bool operator==(const TemporalInterval&, const TemporalInterval&) = default;
};

struct GroundingSample {
  std::string id;  // unique per dataset: "<video_id>#<ordinal>"
  std::string video_id;
  std::string query;
  TemporalInterval gt{0.0, 0.0, TimeUnit::kSeconds};
  double duration = 0.0;
};

// Finds the first "from <num> to <num>" (case-insensitive), else the first two numbers.
// Bare numbers take `default_unit`; an adjoining "s"/"sec"/"second" suffix means seconds.
// Reversed endpoints are swapped. Throws kParseFailure with fewer than two numbers.
TemporalInterval parse_grounding_answer(std::string_view text, TimeUnit default_unit = TimeUnit::kFrames);
std::optional<TemporalInterval> try_parse_grounding_answer(std::string_view text,
                                                           TimeUnit default_unit = TimeUnit::kFrames);

TemporalInterval frames_to_seconds(const TemporalInterval& frames, const Timeline& timeline);
TemporalInterval frames_to_seconds(const TemporalInterval& frames, const FrameSequence& seq);

double iou(const TemporalInterval& a, const TemporalInterval& b);

inline const std::vector<double> kDefaultThresholds = {0.3, 0.5, 0.7};

struct EvalReport {
  std::vector<std::string> sample_ids;
  std::vector<double> per_sample_iou;
  std::map<double, double> recall_at;
  double miou = 0.0;
  std::size_t n = 0;
  std::size_t n_failed_parse = 0;
};

// Predictions are keyed by sample id; nullopt or a missing key scores IoU 0 and counts as
// a failed parse.
using PredictionMap = std::map<std::string, std::optional<TemporalInterval>>;

EvalReport evaluate(std::span<const GroundingSample> samples, const PredictionMap& predictions,
                    std::span<const double> thresholds = kDefaultThresholds);

std::string threshold_key(double m);
nlohmann::json report_to_json(const EvalReport& report);
void write_per_sample_csv(const std::filesystem::path& path, const EvalReport& report,
                          std::span<const GroundingSample> samples, const PredictionMap& predictions);

struct LoadStats {
  std::size_t skipped = 0;
};

// "<video_id> <start_s> <end_s>##<sentence>" per line. Durations, when known, clamp gt.
std::vector<GroundingSample> load_charades_sta(const std::filesystem::path& path,
                                               const std::map<std::string, double>& durations = {},
                                               LoadStats* stats = nullptr);

// {video_id: {duration, timestamps: [[s, e], ...], sentences: [...]}, ...}
std::vector<GroundingSample> load_activitynet_captions(const std::filesystem::path& path);

}  // namespace t2sgrid
