#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/image.hpp"

namespace t2sgrid {

enum class TimeUnit { kFrames, kSeconds };

std::string_view to_string(TimeUnit unit);
TimeUnit parse_time_unit(std::string_view text);

// Grid layout plus sliding-window stride. Written as g<cols><rows>_s<stride>,
// or g<cols>x<rows>_s<stride> once either side reaches 10.
struct GridConfig {
  int cols = 1;
  int rows = 1;
  int stride = 1;
  int gutter_px = 0;

  int window_size() const noexcept { return cols * rows; }
  std::string to_string() const;
  void validate() const;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

GridConfig parse_grid_config(std::string_view spec);

struct WindowPlan {
  int window_index = 0;
  int start_frame = 0;
  std::vector<int> frame_indices;  // exactly k entries, row-major cell order
  int pad_count = 0;

  int real_count() const noexcept { return static_cast<int>(frame_indices.size()) - pad_count; }
  int end_frame() const noexcept { return frame_indices[real_count() - 1]; }

  friend bool operator==(const WindowPlan&, const WindowPlan&) = default;
};

// Windows start at i*stride; the last one is pulled back to T-k so frame T-1 is always
// covered. Sequences shorter than k yield one window padded with copies of frame T-1.
std::vector<WindowPlan> plan_windows(int frame_count, const GridConfig& config);

struct GridImage {
  WindowPlan plan;
  Image image;
  Resolution cell_size;
  double start_time = 0.0;
  double end_time = 0.0;
  int cols = 1;
  int rows = 1;
  int gutter_px = 0;
};

Resolution composite_size(Resolution cell, const GridConfig& config);

GridImage compose_grid(const FrameSequence& seq, const WindowPlan& plan, const GridConfig& config);
std::vector<GridImage> compose_all(const FrameSequence& seq, const GridConfig& config);

Image extract_cell(const GridImage& grid, int row, int col, const GridConfig& config);

// Window-local frame index of grid cell (row, col) in row-major order.
int frame_index_of_cell(int row, int col, int cols);

// Window-local frame index of the frame owning patch (patch_row, patch_col), where each
// frame spans patches_h x patches_w patches.
int frame_index_of_patch(int patch_row, int patch_col, int patches_h, int patches_w, int cols);

// One manifest row per grid image written to disk.
struct GridRecord {
  std::string video_id;
  int window_index = 0;
  int start_frame = 0;
  int end_frame = 0;
  double start_time_s = 0.0;
  double end_time_s = 0.0;
  int pad_count = 0;
  std::string image_path;
  int cols = 1;
  int rows = 1;
  int width = 0;
  int height = 0;
  int cell_w = 0;
  int cell_h = 0;
  int gutter_px = 0;

  friend bool operator==(const GridRecord&, const GridRecord&) = default;
};

GridRecord make_record(const GridImage& grid, std::string video_id, std::string image_path);

void to_json(nlohmann::json& j, const GridRecord& r);
void from_json(const nlohmann::json& j, GridRecord& r);

std::vector<GridRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const GridRecord> records);

struct TokenizerModel {
  int merge_px = 28;  // pixel side of one merged visual token
  int overhead = 0;   // constant tokens per image
};

struct TokenBudget {
  long long total_visual_tokens = 0;
  std::vector<long long> per_grid_tokens;
  long long text_tokens_estimate = 0;
  long long grand_total = 0;
};

long long image_tokens(int width, int height, const TokenizerModel& model);
long long approx_text_tokens(std::string_view text);

TokenBudget estimate_tokens(std::span<const GridImage> grids, const TokenizerModel& model,
                            TimeUnit unit = TimeUnit::kFrames);
TokenBudget estimate_tokens(std::span<const GridRecord> records, const TokenizerModel& model,
                            TimeUnit unit = TimeUnit::kFrames);

}  // namespace t2sgrid
