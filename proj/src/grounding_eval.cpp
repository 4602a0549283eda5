#include "t2sgrid/grounding_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "t2sgrid/error.hpp"
#include "t2sgrid/log.hpp"

namespace t2sgrid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A number with an optional unit word glued on or one space away.
constexpr const char* kNumber = R"((\d+(?:\.\d+)?)\s*(seconds?|secs?|s|frames?)?\b)";

std::optional<TimeUnit> unit_of_suffix(const std::ssub_match& m) {
  if (!m.matched) return std::nullopt;
  std::string s = m.str();
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s.rfind("frame", 0) == 0) return TimeUnit::kFrames;
  return TimeUnit::kSeconds;
}

TemporalInterval make_interval(double a, double b, std::optional<TimeUnit> ua, std::optional<TimeUnit> ub,
                               bool frame_word, TimeUnit fallback) {
  TimeUnit unit = fallback;
  if (ua == TimeUnit::kSeconds || ub == TimeUnit::kSeconds) {
    unit = TimeUnit::kSeconds;
  } else if (frame_word || ua || ub) {
    unit = TimeUnit::kFrames;
  }
  if (a > b) std::swap(a, b);
  return {a, b, unit};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::optional<TemporalInterval> try_parse_grounding_answer(std::string_view text, TimeUnit default_unit) {
  static const std::regex kFromTo(std::string(R"(from\s+(frames?\s+)?)") + kNumber +
                                      R"(\s*(?:-|to|until|and)\s+(frames?\s+)?)" + kNumber,
                                  std::regex::icase);
  static const std::regex kAnyNumber(kNumber, std::regex::icase);

  const std::string s(text);
  std::smatch m;
  if (std::regex_search(s, m, kFromTo)) {
    return make_interval(std::stod(m[2].str()), std::stod(m[5].str()), unit_of_suffix(m[3]),
                         unit_of_suffix(m[6]), m[1].matched || m[4].matched, default_unit);
  }
  auto it = std::sregex_iterator(s.begin(), s.end(), kAnyNumber);
  const auto end = std::sregex_iterator();
  if (it == end) return std::nullopt;
  const std::smatch first = *it;
  if (++it == end) return std::nullopt;
  const std::smatch second = *it;
  return make_interval(std::stod(first[1].str()), std::stod(second[1].str()), unit_of_suffix(first[2]),
                       unit_of_suffix(second[2]), false, default_unit);
}

TemporalInterval parse_grounding_answer(std::string_view text, TimeUnit default_unit) {
  if (auto parsed = try_parse_grounding_answer(text, default_unit)) return *parsed;
  throw Error(Errc::kParseFailure, "no interval in reply: \"" + std::string(text.substr(0, 200)) + "\"");
}

TemporalInterval frames_to_seconds(const TemporalInterval& frames, const Timeline& timeline) {
  if (frames.unit != TimeUnit::kFrames) {
    throw Error(Errc::kUnitMismatch, "frames_to_seconds expects a frame interval");
  }
  if (timeline.times.empty()) throw Error(Errc::kInvalidSequence, timeline.video_id + ": empty timeline");
  const double last = static_cast<double>(timeline.size() - 1);
  const double lo = std::clamp(std::min(frames.start, frames.end), 0.0, last);
  const double hi = std::clamp(std::max(frames.start, frames.end), 0.0, last);
  const auto first_idx = static_cast<std::size_t>(std::floor(lo));
  const auto last_idx = static_cast<std::size_t>(std::ceil(hi));
  return {timeline.times[first_idx], timeline.times[last_idx], TimeUnit::kSeconds};
}

TemporalInterval frames_to_seconds(const TemporalInterval& frames, const FrameSequence& seq) {
  return frames_to_seconds(frames, Timeline::of(seq));
}

double iou(const TemporalInterval& a, const TemporalInterval& b) {
  if (a.unit != b.unit) throw Error(Errc::kUnitMismatch, "iou of frame and second intervals");
  const double a0 = std::min(a.start, a.end), a1 = std::max(a.start, a.end);
  const double b0 = std::min(b.start, b.end), b1 = std::max(b.start, b.end);
  const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  const double uni = (a1 - a0) + (b1 - b0) - inter;
  if (uni <= 0.0) return (a0 == b0 && a1 == b1) ? 1.0 : 0.0;
  return inter / uni;
}

EvalReport evaluate(std::span<const GroundingSample> samples, const PredictionMap& predictions,
                    std::span<const double> thresholds) {
  EvalReport report;
  std::set<std::string> seen;
  for (const GroundingSample& s : samples) {
    if (!seen.insert(s.id).second) throw Error(Errc::kDuplicateSample, s.id);
  }
  report.n = samples.size();
  report.sample_ids.reserve(samples.size());
  report.per_sample_iou.reserve(samples.size());
  for (const GroundingSample& s : samples) {
    double value = 0.0;
    const auto it = predictions.find(s.id);
    if (it == predictions.end() || !it->second) {
      ++report.n_failed_parse;
    } else {
      value = iou(*it->second, s.gt);
    }
    report.sample_ids.push_back(s.id);
    report.per_sample_iou.push_back(value);
  }
  double sum = 0.0;
  for (double v : report.per_sample_iou) sum += v;
  report.miou = report.n ? sum / static_cast<double>(report.n) : 0.0;
  for (double m : thresholds) {
    std::size_t hits = 0;
    for (double v : report.per_sample_iou) hits += (v >= m) ? 1 : 0;
    report.recall_at[m] = report.n ? static_cast<double>(hits) / static_cast<double>(report.n) : 0.0;
  }
  return report;
}

std::string threshold_key(double m) {
  std::ostringstream os;
  os << m;
  return os.str();
}

json report_to_json(const EvalReport& report) {
  json recall = json::object();
  for (const auto& [m, rate] : report.recall_at) recall[threshold_key(m)] = rate;
  return json{{"miou", report.miou},
              {"recall", recall},
              {"n", report.n},
              {"n_failed_parse", report.n_failed_parse}};
}

void write_per_sample_csv(const fs::path& path, const EvalReport& report,
                          std::span<const GroundingSample> samples, const PredictionMap& predictions) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << "video_id,iou,pred_start,pred_end,gt_start,gt_end\n";
  out.precision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const GroundingSample& s = samples[i];
    out << s.video_id << ',' << report.per_sample_iou[i] << ',';
    const auto it = predictions.find(s.id);
    if (it != predictions.end() && it->second) {
      out << it->second->start << ',' << it->second->end;
    } else {
      out << ',';
    }
    out << ',' << s.gt.start << ',' << s.gt.end << '\n';
  }
}

std::vector<GroundingSample> load_charades_sta(const fs::path& path,
                                               const std::map<std::string, double>& durations,
                                               LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read annotations " + path.string());
  std::vector<GroundingSample> out;
  std::map<std::string, int> ordinals;
  std::size_t skipped = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto sep = line.find("##");
    std::istringstream head(sep == std::string::npos ? std::string() : line.substr(0, sep));
    std::string vid, rest;
    double start = 0.0, end = 0.0;
    if (sep == std::string::npos || !(head >> vid >> start >> end) || (head >> rest) ||
        !std::isfinite(start) || !std::isfinite(end)) {
      ++skipped;
      log::warn(path.string() + ":" + std::to_string(line_no) + ": malformed annotation skipped");
      continue;
    }
    GroundingSample s;
    s.video_id = vid;
    s.id = vid + "#" + std::to_string(ordinals[vid]++);
    s.query = trim(line.substr(sep + 2));
    if (start > end) std::swap(start, end);
    const auto d = durations.find(vid);
    s.duration = d != durations.end() ? d->second : std::max(end, 0.0);
    s.gt = {std::clamp(start, 0.0, s.duration), std::clamp(end, 0.0, s.duration), TimeUnit::kSeconds};
    out.push_back(std::move(s));
  }
  if (stats) stats->skipped = skipped;
  return out;
}

std::vector<GroundingSample> load_activitynet_captions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read annotations " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::kSchemaError, path.string() + ": " + e.what());
  }
  if (!root.is_object()) throw Error(Errc::kSchemaError, path.string() + ": top level must be an object");
  std::vector<GroundingSample> out;
  for (const auto& [vid, entry] : root.items()) {
    try {
      const double duration = entry.at("duration").get<double>();
      const auto& stamps = entry.at("timestamps");
      const auto& sentences = entry.at("sentences");
      if (!stamps.is_array() || !sentences.is_array() || stamps.size() != sentences.size()) {
        throw Error(Errc::kSchemaError, vid + ": timestamps/sentences length mismatch");
      }
      for (std::size_t i = 0; i < stamps.size(); ++i) {
        double start = stamps[i].at(0).get<double>();
        double end = stamps[i].at(1).get<double>();
        if (start > end) std::swap(start, end);
        GroundingSample s;
        s.video_id = vid;
        s.id = vid + "#" + std::to_string(i);
        s.query = trim(sentences[i].get<std::string>());
        s.duration = duration;
        s.gt = {std::clamp(start, 0.0, duration), std::clamp(end, 0.0, duration), TimeUnit::kSeconds};
        out.push_back(std::move(s));
      }
    } catch (const json::exception& e) {
      throw Error(Errc::kSchemaError, vid + ": " + e.what());
    }
  }
  return out;
}

}  // namespace t2sgrid
