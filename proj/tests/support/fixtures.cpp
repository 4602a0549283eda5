#include <algorithm>
#include "fixtures.hpp"

#include <atomic>
#include <unistd.h>

namespace t2sgrid::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Image random_image(int width, int height, std::mt19937_64& rng) {
  Image img(width, height);
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); i += 8) {
    std::uint64_t bits = rng();
    for (std::size_t j = i; j < std::min(px.size(), i + 8); ++j, bits >>= 8) px[j] = static_cast<std::uint8_t>(bits);
  }
  return img;
}

FrameSequence random_sequence(const std::string& id, int frames, Resolution res, std::mt19937_64& rng,
                              double fps) {
  FrameSequence seq;
  seq.video_id = id;
  seq.sample_fps = fps;
  seq.resolution = res;
  for (int i = 0; i < frames; ++i) {
    seq.frames.push_back({i, i / fps, random_image(res.width, res.height, rng)});
  }
  return seq;
}

FrameSequence solid_sequence(const std::string& id, const std::vector<Rgb>& colours, Resolution res, double fps) {
  FrameSequence seq;
  seq.video_id = id;
  seq.sample_fps = fps;
  seq.resolution = res;
  for (std::size_t i = 0; i < colours.size(); ++i) {
    seq.frames.push_back({static_cast<int>(i), i / fps, Image(res.width, res.height, colours[i])});
  }
  return seq;
}

}  // namespace t2sgrid::testing
