#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/grounding_eval.hpp"
#include "t2sgrid/image.hpp"

namespace t2sgrid {

// Solid colour for an unmarked frame; never equal to any marker with a blue channel != 0x40.
Rgb index_colour(int frame_index);

struct MarkerVideoSpec {
  std::string video_id;
  int frame_count = 1;
  Resolution resolution{32, 24};
  double fps = 1.0;
  int target_first = 0;  // inclusive frame range painted with the marker colour
  int target_last = 0;
  Rgb marker = {255, 0, 255};
};

FrameSequence make_marker_video(const MarkerVideoSpec& spec);

// Ground truth implied by the marker range, in seconds.
GroundingSample marker_sample(const MarkerVideoSpec& spec, int ordinal = 0);

struct SyntheticCorpus {
  std::filesystem::path frames_root;
  std::filesystem::path annotations;  // Charades-STA text format
  std::vector<MarkerVideoSpec> videos;
};

struct CorpusOptions {
  int videos = 10;
  int min_frames = 1;
  int max_frames = 60;
  Resolution resolution{32, 24};
  double fps = 1.0;
  std::uint64_t seed = 0;
};

// Writes <root>/frames/<id>/%06d.png (+meta.json) and <root>/annotations.txt.
SyntheticCorpus write_marker_corpus(const std::filesystem::path& root, const CorpusOptions& options);

}  // namespace t2sgrid
