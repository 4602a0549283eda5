#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace t2sgrid {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved 8-bit RGB raster, rows top to bottom.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t row_bytes() const noexcept { return static_cast<std::size_t>(width_) * kChannels; }

  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> row(int y) noexcept;
  std::span<const std::uint8_t> row(int y) const noexcept;

  Rgb at(int x, int y) const noexcept;
  void set(int x, int y, Rgb c) noexcept;

  // Copies `src` with its top-left corner placed at (x, y); must fit.
  void blit(const Image& src, int x, int y);
  Image crop(int x, int y, int w, int h) const;

  // True when every pixel equals the same colour; writes it to `out`.
  bool is_solid(Rgb* out = nullptr) const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

enum class ImageFormat { kPng, kJpeg };

// Format picked from the extension (.png, .jpg, .jpeg; case-insensitive).
ImageFormat format_for_path(const std::filesystem::path& path);
bool is_supported_image(const std::filesystem::path& path);

Image read_image(const std::filesystem::path& path);
void write_image(const Image& image, const std::filesystem::path& path, int jpeg_quality = 95);

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);

}  // namespace t2sgrid
