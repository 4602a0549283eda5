#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "t2sgrid/image.hpp"

namespace t2sgrid {

struct Resolution {
  int width = 0;
  int height = 0;

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct SourceVideo {
  std::string id;
  double duration_s = 0.0;
  double native_fps = 1.0;
  std::filesystem::path frame_locator;
};

struct Frame {
  int index = 0;
  double source_time = 0.0;
  Image image;
};

// Ordered, uniformly sized frames. Indices are 0..size()-1 and source times strictly increase.
struct FrameSequence {
  std::string video_id;
  std::vector<Frame> frames;
  double sample_fps = 1.0;
  Resolution resolution;

  std::size_t size() const noexcept { return frames.size(); }
  bool empty() const noexcept { return frames.empty(); }
  std::vector<double> times() const;

  // Throws kInvalidSequence describing the first violated invariant.
  void validate() const;
};

// Per-frame source times of a sampled sequence, without pixels.
struct Timeline {
  std::string video_id;
  std::vector<double> times;
  double sample_fps = 1.0;

  std::size_t size() const noexcept { return times.size(); }
  static Timeline of(const FrameSequence& seq);
};

// Sidecar `meta.json` next to the frames: {"duration_s": ..., "fps": ...}.
struct FrameDirMeta {
  std::optional<double> duration_s;
  std::optional<double> fps;
};

inline constexpr const char* kMetaFileName = "meta.json";

std::optional<FrameDirMeta> read_frame_dir_meta(const std::filesystem::path& dir);
void write_frame_dir_meta(const std::filesystem::path& dir, const FrameDirMeta& meta);

// Image files named by a bare (zero-padded) number, sorted numerically.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

FrameSequence load_frame_directory(const std::filesystem::path& dir,
                                   std::optional<double> fps_hint = std::nullopt);

SourceVideo describe_frame_directory(const std::filesystem::path& dir,
                                     std::optional<double> fps_hint = std::nullopt);

// Write a sequence back out as `<dir>/%06d.<ext>` plus meta.json.
void write_frame_directory(const FrameSequence& seq, const std::filesystem::path& dir,
                           const std::string& ext = "png");

struct CountTarget {
  int count = 0;
};
struct FpsTarget {
  double fps = 0.0;
};
using SampleTarget = std::variant<CountTarget, FpsTarget>;

// Source indices picked by count-mode sampling; exposed for planning without pixels.
std::vector<int> uniform_count_indices(int source_length, int count);
std::vector<int> uniform_fps_indices(const std::vector<double>& times, double fps);

FrameSequence sample_uniform(const FrameSequence& seq, const SampleTarget& target);

// Runs an external decoder producing a frame directory. Placeholders in `command`:
// {input}, {output}, {fps}. Each whitespace-separated word becomes one argv entry.
struct DecoderCommand {
  std::vector<std::string> argv = {"ffmpeg", "-loglevel", "error", "-y",  "-i",
                                   "{input}", "-vf",      "fps={fps}", "-start_number", "0",
                                   "{output}/%06d.png"};
};

void decode_video(const std::filesystem::path& input, const std::filesystem::path& output_dir,
                  double fps, const DecoderCommand& decoder = {});

}  // namespace t2sgrid
