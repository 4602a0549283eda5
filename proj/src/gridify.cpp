#include "t2sgrid/gridify.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include "t2sgrid/error.hpp"
#include "t2sgrid/prompt.hpp"

namespace t2sgrid {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(TimeUnit unit) {
  return unit == TimeUnit::kFrames ? "frames" : "seconds";
}

TimeUnit parse_time_unit(std::string_view text) {
  if (text == "frames" || text == "frame") return TimeUnit::kFrames;
  if (text == "seconds" || text == "second" || text == "s") return TimeUnit::kSeconds;
  throw Error(Errc::kConfigError, "unknown time unit '" + std::string(text) + "'");
}

std::string GridConfig::to_string() const {
  std::string out = "g";
  if (cols < 10 && rows < 10) {
    out += std::to_string(cols) + std::to_string(rows);
  } else {
    out += std::to_string(cols) + "x" + std::to_string(rows);
  }
  return out + "_s" + std::to_string(stride);
}

void GridConfig::validate() const {
  if (cols < 1 || rows < 1) {
    throw Error(Errc::kParseError, "grid needs at least one row and column");
  }
  if (stride < 1 || stride > window_size()) {
    throw Error(Errc::kInvalidStride, "stride " + std::to_string(stride) + " outside [1, " +
                                          std::to_string(window_size()) + "]");
  }
  if (gutter_px < 0) throw Error(Errc::kInvalidGeometry, "gutter must be >= 0");
}

GridConfig parse_grid_config(std::string_view spec) {
  static const std::regex kCompact(R"(g([0-9])([0-9])_s([0-9]+))");
  static const std::regex kExtended(R"(g([0-9]+)x([0-9]+)_s([0-9]+))");
  const std::string text(spec);
  std::smatch m;
  if (!std::regex_match(text, m, kCompact) && !std::regex_match(text, m, kExtended)) {
    throw Error(Errc::kParseError, "bad grid spec '" + text + "' (expected g<col><row>_s<stride>)");
  }
  GridConfig config;
  try {
    config.cols = std::stoi(m[1].str());
    config.rows = std::stoi(m[2].str());
    config.stride = std::stoi(m[3].str());
  } catch (const std::out_of_range&) {
    throw Error(Errc::kParseError, "grid spec '" + text + "' has out-of-range numbers");
  }
  config.validate();
  return config;
}

std::vector<WindowPlan> plan_windows(int frame_count, const GridConfig& config) {
  config.validate();
  if (frame_count < 1) throw Error(Errc::kNoFrames, "cannot plan windows over zero frames");
  const int k = config.window_size();
  const int s = config.stride;

  std::vector<int> starts;
  if (frame_count <= k) {
    starts.push_back(0);
  } else {
    const int last_start = frame_count - k;
    for (int start = 0; start <= last_start; start += s) starts.push_back(start);
    if (starts.back() != last_start) starts.push_back(last_start);
  }

  std::vector<WindowPlan> plans;
  plans.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    WindowPlan p;
    p.window_index = static_cast<int>(i);
    p.start_frame = starts[i];
    p.frame_indices.resize(k);
    for (int c = 0; c < k; ++c) p.frame_indices[c] = std::min(starts[i] + c, frame_count - 1);
    p.pad_count = std::max(0, starts[i] + k - frame_count);
    plans.push_back(std::move(p));
  }
  return plans;
}

Resolution composite_size(Resolution cell, const GridConfig& config) {
  return {config.cols * cell.width + (config.cols - 1) * config.gutter_px,
          config.rows * cell.height + (config.rows - 1) * config.gutter_px};
}

GridImage compose_grid(const FrameSequence& seq, const WindowPlan& plan, const GridConfig& config) {
  config.validate();
  if (static_cast<int>(plan.frame_indices.size()) != config.window_size()) {
    throw Error(Errc::kPlanMismatch, "plan has " + std::to_string(plan.frame_indices.size()) +
                                         " cells, grid " + config.to_string() + " needs " +
                                         std::to_string(config.window_size()));
  }
  if (plan.pad_count < 0 || plan.pad_count >= config.window_size()) {
    throw Error(Errc::kPlanMismatch, "invalid pad count " + std::to_string(plan.pad_count));
  }
  for (int idx : plan.frame_indices) {
    if (idx < 0 || idx >= static_cast<int>(seq.size())) {
      throw Error(Errc::kPlanMismatch, seq.video_id + ": frame index " + std::to_string(idx) +
                                           " outside [0, " + std::to_string(seq.size()) + ")");
    }
  }

  const Resolution cell = seq.resolution;
  const Resolution size = composite_size(cell, config);
  GridImage grid;
  grid.plan = plan;
  grid.image = Image(size.width, size.height);  // gutters stay black
  grid.cell_size = cell;
  grid.cols = config.cols;
  grid.rows = config.rows;
  grid.gutter_px = config.gutter_px;
  for (int r = 0; r < config.rows; ++r) {
    for (int c = 0; c < config.cols; ++c) {
      const Frame& f = seq.frames[plan.frame_indices[frame_index_of_cell(r, c, config.cols)]];
      if (f.image.width() != cell.width || f.image.height() != cell.height) {
        throw Error(Errc::kResolutionMismatch, seq.video_id + ": frame " + std::to_string(f.index));
      }
      grid.image.blit(f.image, c * (cell.width + config.gutter_px), r * (cell.height + config.gutter_px));
    }
  }
  grid.start_time = seq.frames[plan.frame_indices.front()].source_time;
  grid.end_time = seq.frames[plan.end_frame()].source_time;
  return grid;
}

std::vector<GridImage> compose_all(const FrameSequence& seq, const GridConfig& config) {
  std::vector<GridImage> grids;
  for (const WindowPlan& plan : plan_windows(static_cast<int>(seq.size()), config)) {
    grids.push_back(compose_grid(seq, plan, config));
  }
  return grids;
}

Image extract_cell(const GridImage& grid, int row, int col, const GridConfig& config) {
  if (row < 0 || row >= config.rows || col < 0 || col >= config.cols) {
    throw Error(Errc::kCellOutOfRange, "cell (" + std::to_string(row) + "," + std::to_string(col) +
                                           ") outside " + config.to_string());
  }
  const Resolution cell = grid.cell_size;
  return grid.image.crop(col * (cell.width + config.gutter_px), row * (cell.height + config.gutter_px),
                         cell.width, cell.height);
}

int frame_index_of_cell(int row, int col, int cols) {
  if (cols < 1 || row < 0 || col < 0 || col >= cols) {
    throw Error(Errc::kInvalidCell, "cell (" + std::to_string(row) + "," + std::to_string(col) +
                                        ") invalid for " + std::to_string(cols) + " columns");
  }
  return row * cols + col;
}

int frame_index_of_patch(int patch_row, int patch_col, int patches_h, int patches_w, int cols) {
  if (patches_h < 1 || patches_w < 1) {
    throw Error(Errc::kInvalidGeometry, "frame patch dimensions must be >= 1");
  }
  if (patch_row < 0 || patch_col < 0) {
    throw Error(Errc::kInvalidGeometry, "patch coordinates must be >= 0");
  }
  return frame_index_of_cell(patch_row / patches_h, patch_col / patches_w, cols);
}

GridRecord make_record(const GridImage& grid, std::string video_id, std::string image_path) {
  GridRecord r;
  r.video_id = std::move(video_id);
  r.window_index = grid.plan.window_index;
  r.start_frame = grid.plan.start_frame;
  r.end_frame = grid.plan.end_frame();
  r.start_time_s = grid.start_time;
  r.end_time_s = grid.end_time;
  r.pad_count = grid.plan.pad_count;
  r.image_path = std::move(image_path);
  r.cols = grid.cols;
  r.rows = grid.rows;
  r.width = grid.image.width();
  r.height = grid.image.height();
  r.cell_w = grid.cell_size.width;
  r.cell_h = grid.cell_size.height;
  r.gutter_px = grid.gutter_px;
  return r;
}

void to_json(json& j, const GridRecord& r) {
  j = json{{"video_id", r.video_id},       {"window_index", r.window_index},
           {"start_frame", r.start_frame}, {"end_frame", r.end_frame},
           {"start_time_s", r.start_time_s}, {"end_time_s", r.end_time_s},
           {"pad_count", r.pad_count},     {"image_path", r.image_path},
           {"cols", r.cols},               {"rows", r.rows},
           {"width", r.width},             {"height", r.height},
           {"cell_w", r.cell_w},           {"cell_h", r.cell_h},
           {"gutter_px", r.gutter_px}};
}

void from_json(const json& j, GridRecord& r) {
  j.at("video_id").get_to(r.video_id);
  j.at("window_index").get_to(r.window_index);
  j.at("start_frame").get_to(r.start_frame);
  j.at("end_frame").get_to(r.end_frame);
  j.at("start_time_s").get_to(r.start_time_s);
  j.at("end_time_s").get_to(r.end_time_s);
  j.at("pad_count").get_to(r.pad_count);
  j.at("image_path").get_to(r.image_path);
  j.at("cols").get_to(r.cols);
  j.at("rows").get_to(r.rows);
  r.width = j.value("width", 0);
  r.height = j.value("height", 0);
  r.cell_w = j.value("cell_w", 0);
  r.cell_h = j.value("cell_h", 0);
  r.gutter_px = j.value("gutter_px", 0);
}

std::vector<GridRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read manifest " + path.string());
  std::vector<GridRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<GridRecord>());
    } catch (const json::exception& e) {
      throw Error(Errc::kSchemaError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const fs::path& path, std::span<const GridRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write manifest " + path.string());
  for (const GridRecord& r : records) out << json(r).dump() << '\n';
}

long long image_tokens(int width, int height, const TokenizerModel& model) {
  if (model.merge_px <= 0) throw Error(Errc::kInvalidModel, "merge_px must be > 0");
  if (model.overhead < 0) throw Error(Errc::kInvalidModel, "overhead must be >= 0");
  const long long p = model.merge_px;
  return ((width + p - 1) / p) * ((height + p - 1) / p) + model.overhead;
}

long long approx_text_tokens(std::string_view text) {
  long long count = 0;
  bool in_word = false;
  for (unsigned char ch : text) {
    const bool alnum = std::isalnum(ch) != 0;
    if (alnum) {
      if (!in_word) ++count;
      in_word = true;
    } else {
      in_word = false;
      if (!std::isspace(ch)) ++count;
    }
  }
  return count;
}

namespace {

template <typename Grid, typename SizeOf>
TokenBudget budget_for(std::span<const Grid> grids, const TokenizerModel& model, TimeUnit unit,
                       SizeOf size_of) {
  if (model.merge_px <= 0) throw Error(Errc::kInvalidModel, "merge_px must be > 0");
  TokenBudget b;
  for (const Grid& g : grids) {
    const Resolution size = size_of(g);
    const long long t = image_tokens(size.width, size.height, model);
    b.per_grid_tokens.push_back(t);
    b.total_visual_tokens += t;
    b.text_tokens_estimate += approx_text_tokens(composite_timestamp(g, unit));
  }
  b.grand_total = b.total_visual_tokens + b.text_tokens_estimate;
  return b;
}

}  // namespace

TokenBudget estimate_tokens(std::span<const GridImage> grids, const TokenizerModel& model, TimeUnit unit) {
  return budget_for(grids, model, unit, [](const GridImage& g) {
    return Resolution{g.image.width(), g.image.height()};
  });
}

TokenBudget estimate_tokens(std::span<const GridRecord> records, const TokenizerModel& model,
                            TimeUnit unit) {
  return budget_for(records, model, unit, [](const GridRecord& r) {
    if (r.width <= 0 || r.height <= 0) {
      throw Error(Errc::kSchemaError, r.video_id + ": manifest record lacks width/height");
    }
    return Resolution{r.width, r.height};
  });
}

}  // namespace t2sgrid
