#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/gridify.hpp"
#include "t2sgrid/grounding_eval.hpp"

namespace t2sgrid {

struct PromptElement {
  enum class Kind { kText, kImage };

  Kind kind = Kind::kText;
  std::string text;
  // Image payload: a file on disk, or pixels carried inline.
  std::filesystem::path image_path;
  std::shared_ptr<const Image> inline_image;
  // Window metadata for image elements, when known.
  std::optional<GridRecord> grid;

  static PromptElement make_text(std::string text);
  static PromptElement make_image(std::filesystem::path path, std::optional<GridRecord> grid = std::nullopt);
  static PromptElement make_inline_image(std::shared_ptr<const Image> image,
                                         std::optional<GridRecord> grid = std::nullopt);

  bool is_text() const noexcept { return kind == Kind::kText; }
  bool is_image() const noexcept { return kind == Kind::kImage; }
};

// Alternating timestamp text / grid image elements, followed by the query.
struct PromptSequence {
  std::vector<PromptElement> elements;
  std::optional<std::string> system_text;
  std::string query_text;

  std::size_t image_count() const noexcept { return elements.size() / 2; }
  void validate() const;
};

// "from Frame 0 to Frame 11." or "from 0.0s to 11.0s."; padded cells never count.
std::string composite_timestamp(const GridImage& grid, TimeUnit unit);
std::string composite_timestamp(const GridRecord& record, TimeUnit unit);

PromptSequence assemble_interleaved(std::span<const GridImage> grids, TimeUnit unit, std::string query);
PromptSequence assemble_interleaved(std::span<const GridRecord> records, TimeUnit unit, std::string query);

std::string render_vtg_query(std::string_view query, TimeUnit unit = TimeUnit::kFrames);

// Wire form: {"system": ..., "content": [{"type":"text","text":...}, {"type":"image","path":...}, ...]}
// with the query as the final text part.
nlohmann::json prompt_to_json(const PromptSequence& seq);

struct InstructionRecord {
  std::string video_id;
  std::vector<std::string> images;
  std::string question;
  std::string answer;
  int gt_start_frame = 0;
  int gt_end_frame = 0;
};

void to_json(nlohmann::json& j, const InstructionRecord& r);
void from_json(const nlohmann::json& j, InstructionRecord& r);

std::string render_answer(int start_frame, int end_frame);

// Nearest sampled frame to `t` (ties go to the earlier frame), with t clamped into the
// timeline's span. `clamped` is set when clamping was needed.
int nearest_frame(const Timeline& timeline, double t, bool* clamped = nullptr);

std::filesystem::path grid_image_path(const std::filesystem::path& grid_root, const std::string& video_id,
                                      int window_index);

std::vector<InstructionRecord> emit_instruction_dataset(std::span<const GroundingSample> annotations,
                                                        const std::map<std::string, Timeline>& sequences,
                                                        const GridConfig& config,
                                                        const std::filesystem::path& grid_root);

void write_jsonl(const std::filesystem::path& path, std::span<const InstructionRecord> records);

}  // namespace t2sgrid
