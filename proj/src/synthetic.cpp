#include "t2sgrid/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "t2sgrid/error.hpp"

namespace t2sgrid {

namespace fs = std::filesystem;

Rgb index_colour(int frame_index) {
  return {static_cast<std::uint8_t>(frame_index & 0xFF), static_cast<std::uint8_t>((frame_index >> 8) & 0xFF),
          0x40};
}

FrameSequence make_marker_video(const MarkerVideoSpec& spec) {
  if (spec.frame_count < 1) throw Error(Errc::kNoFrames, spec.video_id + ": frame_count must be >= 1");
  if (spec.marker.b == 0x40) throw Error(Errc::kConfigError, "marker blue channel collides with frame colours");
  FrameSequence seq;
  seq.video_id = spec.video_id;
  seq.sample_fps = spec.fps;
  seq.resolution = spec.resolution;
  for (int i = 0; i < spec.frame_count; ++i) {
    const bool marked = i >= spec.target_first && i <= spec.target_last;
    seq.frames.push_back({i, static_cast<double>(i) / spec.fps,
                          Image(spec.resolution.width, spec.resolution.height,
                                marked ? spec.marker : index_colour(i))});
  }
  return seq;
}

GroundingSample marker_sample(const MarkerVideoSpec& spec, int ordinal) {
  char hex[8];
  std::snprintf(hex, sizeof(hex), "#%02x%02x%02x", spec.marker.r, spec.marker.g, spec.marker.b);
  GroundingSample s;
  s.video_id = spec.video_id;
  s.id = spec.video_id + "#" + std::to_string(ordinal);
  s.query = std::string("the ") + hex + " marker is shown";
  s.duration = static_cast<double>(spec.frame_count) / spec.fps;
  s.gt = {spec.target_first / spec.fps, spec.target_last / spec.fps, TimeUnit::kSeconds};
  return s;
}

SyntheticCorpus write_marker_corpus(const fs::path& root, const CorpusOptions& options) {
  if (options.min_frames < 1 || options.max_frames < options.min_frames) {
    throw Error(Errc::kConfigError, "invalid synthetic frame range");
  }
  SyntheticCorpus corpus;
  corpus.frames_root = root / "frames";
  corpus.annotations = root / "annotations.txt";
  fs::create_directories(corpus.frames_root);

  std::mt19937_64 rng(options.seed);
  std::ofstream ann(corpus.annotations, std::ios::trunc);
  if (!ann) throw Error(Errc::kIoError, "cannot write " + corpus.annotations.string());
  ann.precision(17);
  for (int v = 0; v < options.videos; ++v) {
    MarkerVideoSpec spec;
    char id[32];
    std::snprintf(id, sizeof(id), "synth%04d", v);
    spec.video_id = id;
    spec.frame_count = std::uniform_int_distribution<int>(options.min_frames, options.max_frames)(rng);
    spec.resolution = options.resolution;
    spec.fps = options.fps;
    spec.target_first = std::uniform_int_distribution<int>(0, spec.frame_count - 1)(rng);
    spec.target_last = std::uniform_int_distribution<int>(spec.target_first, spec.frame_count - 1)(rng);
    write_frame_directory(make_marker_video(spec), corpus.frames_root / spec.video_id);
    const GroundingSample s = marker_sample(spec);
    ann << s.video_id << ' ' << s.gt.start << ' ' << s.gt.end << "##" << s.query << ".\n";
    corpus.videos.push_back(spec);
  }
  return corpus;
}

}  // namespace t2sgrid
