#include "t2sgrid/prompt.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "t2sgrid/error.hpp"
#include "t2sgrid/log.hpp"

namespace t2sgrid {

namespace fs = std::filesystem;
using nlohmann::json;

PromptElement PromptElement::make_text(std::string text) {
  PromptElement e;
  e.kind = Kind::kText;
  e.text = std::move(text);
  return e;
}

PromptElement PromptElement::make_image(fs::path path, std::optional<GridRecord> grid) {
  PromptElement e;
  e.kind = Kind::kImage;
  e.image_path = std::move(path);
  e.grid = std::move(grid);
  return e;
}

PromptElement PromptElement::make_inline_image(std::shared_ptr<const Image> image,
                                               std::optional<GridRecord> grid) {
  PromptElement e;
  e.kind = Kind::kImage;
  e.inline_image = std::move(image);
  e.grid = std::move(grid);
  return e;
}

void PromptSequence::validate() const {
  if (elements.empty()) throw Error(Errc::kEmptyPrompt, "prompt has no grid images");
  if (elements.size() % 2 != 0) throw Error(Errc::kEmptyPrompt, "prompt has an unpaired element");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const PromptElement& e = elements[i];
    const bool want_text = (i % 2 == 0);
    if (e.is_text() != want_text) {
      throw Error(Errc::kEmptyPrompt, "element " + std::to_string(i) + " breaks text/image alternation");
    }
    if (e.is_image() && e.image_path.empty() && !e.inline_image) {
      throw Error(Errc::kEmptyPrompt, "image element " + std::to_string(i) + " has no payload");
    }
    if (e.is_text() && (!e.image_path.empty() || e.inline_image)) {
      throw Error(Errc::kEmptyPrompt, "text element " + std::to_string(i) + " carries an image");
    }
  }
  if (query_text.empty()) throw Error(Errc::kEmptyQuery, "prompt has no query");
}

namespace {

std::string format_timestamp(int start_frame, int end_frame, double start_s, double end_s, TimeUnit unit) {
  char buf[96];
  if (unit == TimeUnit::kFrames) {
    std::snprintf(buf, sizeof(buf), "from Frame %d to Frame %d.", start_frame, end_frame);
  } else {
    std::snprintf(buf, sizeof(buf), "from %.1fs to %.1fs.", start_s, end_s);
  }
  return buf;
}

}  // namespace

std::string composite_timestamp(const GridImage& grid, TimeUnit unit) {
  return format_timestamp(grid.plan.start_frame, grid.plan.end_frame(), grid.start_time, grid.end_time, unit);
}

std::string composite_timestamp(const GridRecord& record, TimeUnit unit) {
  return format_timestamp(record.start_frame, record.end_frame, record.start_time_s, record.end_time_s, unit);
}

PromptSequence assemble_interleaved(std::span<const GridImage> grids, TimeUnit unit, std::string query) {
  if (grids.empty()) throw Error(Errc::kEmptyPrompt, "no grids to assemble");
  if (query.empty()) throw Error(Errc::kEmptyQuery, "empty query");
  std::vector<const GridImage*> order;
  for (const GridImage& g : grids) order.push_back(&g);
  std::stable_sort(order.begin(), order.end(), [](const GridImage* a, const GridImage* b) {
    return a->plan.window_index < b->plan.window_index;
  });
  PromptSequence seq;
  seq.query_text = std::move(query);
  for (const GridImage* g : order) {
    seq.elements.push_back(PromptElement::make_text(composite_timestamp(*g, unit)));
    seq.elements.push_back(
        PromptElement::make_inline_image(std::make_shared<const Image>(g->image), make_record(*g, "", "")));
  }
  return seq;
}

PromptSequence assemble_interleaved(std::span<const GridRecord> records, TimeUnit unit, std::string query) {
  if (records.empty()) throw Error(Errc::kEmptyPrompt, "no grids to assemble");
  if (query.empty()) throw Error(Errc::kEmptyQuery, "empty query");
  std::vector<GridRecord> order(records.begin(), records.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const GridRecord& a, const GridRecord& b) { return a.window_index < b.window_index; });
  PromptSequence seq;
  seq.query_text = std::move(query);
  for (GridRecord& r : order) {
    seq.elements.push_back(PromptElement::make_text(composite_timestamp(r, unit)));
    fs::path path = r.image_path;
    seq.elements.push_back(PromptElement::make_image(std::move(path), std::move(r)));
  }
  return seq;
}

std::string render_vtg_query(std::string_view query, TimeUnit unit) {
  // Sentence-final punctuation is dropped so the template's '?' closes the question.
  std::string q(query);
  while (!q.empty() && (std::isspace(static_cast<unsigned char>(q.back())) || q.back() == '.' ||
                        q.back() == '?' || q.back() == '!')) {
    q.pop_back();
  }
  const auto first = q.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw Error(Errc::kEmptyQuery, "empty grounding query");
  q.erase(0, first);
  const char* what = unit == TimeUnit::kFrames ? "frames" : "seconds";
  return std::string("During which ") + what + " can we see " + q + "?";
}

json prompt_to_json(const PromptSequence& seq) {
  json content = json::array();
  for (const PromptElement& e : seq.elements) {
    if (e.is_text()) {
      content.push_back({{"type", "text"}, {"text", e.text}});
    } else {
      json part = {{"type", "image"}};
      part["path"] = e.image_path.empty() ? std::string("<inline>") : e.image_path.string();
      if (e.grid) {
        part["window_index"] = e.grid->window_index;
        part["start_frame"] = e.grid->start_frame;
        part["end_frame"] = e.grid->end_frame;
      }
      content.push_back(std::move(part));
    }
  }
  content.push_back({{"type", "text"}, {"text", seq.query_text}});
  json j = {{"content", std::move(content)}};
  if (seq.system_text) j["system"] = *seq.system_text;
  return j;
}

void to_json(json& j, const InstructionRecord& r) {
  j = json{{"video_id", r.video_id},
           {"images", r.images},
           {"question", r.question},
           {"answer", r.answer},
           {"gt_interval_frames", {r.gt_start_frame, r.gt_end_frame}}};
}

void from_json(const json& j, InstructionRecord& r) {
  j.at("video_id").get_to(r.video_id);
  j.at("images").get_to(r.images);
  j.at("question").get_to(r.question);
  j.at("answer").get_to(r.answer);
  r.gt_start_frame = j.at("gt_interval_frames").at(0).get<int>();
  r.gt_end_frame = j.at("gt_interval_frames").at(1).get<int>();
}

std::string render_answer(int start_frame, int end_frame) {
  return "From " + std::to_string(start_frame) + " to " + std::to_string(end_frame);
}

int nearest_frame(const Timeline& timeline, double t, bool* clamped) {
  const auto& times = timeline.times;
  if (times.empty()) throw Error(Errc::kInvalidSequence, timeline.video_id + ": empty timeline");
  const bool out_of_range = t < times.front() || t > times.back();
  if (clamped) *clamped = out_of_range;
  t = std::clamp(t, times.front(), times.back());
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  auto idx = static_cast<int>(it - times.begin());
  if (idx > 0 && (it == times.end() || (t - times[idx - 1]) <= (times[idx] - t))) --idx;
  return idx;
}

fs::path grid_image_path(const fs::path& grid_root, const std::string& video_id, int window_index) {
  char name[32];
  std::snprintf(name, sizeof(name), "grid_%04d.png", window_index);
  return grid_root / video_id / name;
}

std::vector<InstructionRecord> emit_instruction_dataset(std::span<const GroundingSample> annotations,
                                                        const std::map<std::string, Timeline>& sequences,
                                                        const GridConfig& config, const fs::path& grid_root) {
  std::vector<InstructionRecord> out;
  out.reserve(annotations.size());
  std::map<std::string, std::vector<std::string>> images_by_video;
  for (const GroundingSample& s : annotations) {
    const auto it = sequences.find(s.video_id);
    if (it == sequences.end()) throw Error(Errc::kMissingVideo, s.video_id);
    const Timeline& tl = it->second;

    auto& images = images_by_video[s.video_id];
    if (images.empty()) {
      for (const WindowPlan& p : plan_windows(static_cast<int>(tl.size()), config)) {
        images.push_back(grid_image_path(grid_root, s.video_id, p.window_index).string());
      }
    }

    bool clamped_start = false, clamped_end = false;
    int start = nearest_frame(tl, std::min(s.gt.start, s.gt.end), &clamped_start);
    int end = nearest_frame(tl, std::max(s.gt.start, s.gt.end), &clamped_end);
    if (clamped_start || clamped_end) {
      log::warn(s.id + ": ground truth [" + std::to_string(s.gt.start) + ", " + std::to_string(s.gt.end) +
                "] clamped to the sampled timeline");
    }
    if (start > end) std::swap(start, end);

    InstructionRecord r;
    r.video_id = s.video_id;
    r.images = images;
    r.question = render_vtg_query(s.query, TimeUnit::kFrames);
    r.answer = render_answer(start, end);
    r.gt_start_frame = start;
    r.gt_end_frame = end;
    out.push_back(std::move(r));
  }
  return out;
}

void write_jsonl(const fs::path& path, std::span<const InstructionRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  for (const InstructionRecord& r : records) out << json(r).dump() << '\n';
}

}  // namespace t2sgrid
