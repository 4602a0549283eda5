#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "t2sgrid/frame_ingest.hpp"
#include "t2sgrid/image.hpp"

namespace t2sgrid::testing {

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t2sgrid");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Image random_image(int width, int height, std::mt19937_64& rng);

// T frames of random noise at `fps`, times i / fps.
FrameSequence random_sequence(const std::string& id, int frames, Resolution res, std::mt19937_64& rng,
                              double fps = 1.0);

FrameSequence solid_sequence(const std::string& id, const std::vector<Rgb>& colours, Resolution res,
                             double fps = 1.0);

}  // namespace t2sgrid::testing
