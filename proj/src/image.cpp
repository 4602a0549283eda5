#include "t2sgrid/image.hpp"

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>
#include <png.h>

#include "t2sgrid/error.hpp"

namespace t2sgrid {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::kInvalidGeometry,
                "image dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  pixels_.resize(static_cast<std::size_t>(width) * height * kChannels);
  for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

std::span<std::uint8_t> Image::row(int y) noexcept {
  return std::span<std::uint8_t>(pixels_).subspan(y * row_bytes(), row_bytes());
}

std::span<const std::uint8_t> Image::row(int y) const noexcept {
  return std::span<const std::uint8_t>(pixels_).subspan(y * row_bytes(), row_bytes());
}

Rgb Image::at(int x, int y) const noexcept {
  const std::size_t o = y * row_bytes() + static_cast<std::size_t>(x) * kChannels;
  return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
}

void Image::set(int x, int y, Rgb c) noexcept {
  const std::size_t o = y * row_bytes() + static_cast<std::size_t>(x) * kChannels;
  pixels_[o] = c.r;
  pixels_[o + 1] = c.g;
  pixels_[o + 2] = c.b;
}

void Image::blit(const Image& src, int x, int y) {
  if (x < 0 || y < 0 || x + src.width() > width_ || y + src.height() > height_) {
    throw Error(Errc::kInvalidGeometry, "blit target rectangle exceeds destination image");
  }
  for (int sy = 0; sy < src.height(); ++sy) {
    auto in = src.row(sy);
    std::copy(in.begin(), in.end(), row(y + sy).begin() + static_cast<std::ptrdiff_t>(x) * kChannels);
  }
}

Image Image::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > width_ || y + h > height_) {
    throw Error(Errc::kInvalidGeometry, "crop rectangle exceeds source image");
  }
  Image out(w, h);
  for (int oy = 0; oy < h; ++oy) {
    auto in = row(y + oy).subspan(static_cast<std::size_t>(x) * kChannels, out.row_bytes());
    std::copy(in.begin(), in.end(), out.row(oy).begin());
  }
  return out;
}

bool Image::is_solid(Rgb* out) const noexcept {
  if (pixels_.empty()) return false;
  const Rgb first = at(0, 0);
  for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
    if (pixels_[i] != first.r || pixels_[i + 1] != first.g || pixels_[i + 2] != first.b) {
      return false;
    }
  }
  if (out) *out = first;
  return true;
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kDecodeError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "short write to " + path.string());
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No C++ objects with destructors may live between setjmp and the longjmp site.
Image decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Image image;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(Errc::kDecodeError, name + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  image = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = image.row(static_cast<int>(cinfo.output_scanline)).data();
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return image;
}

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality) {
  jpeg_compress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(Errc::kIoError, std::string("jpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width());
  cinfo.image_height = static_cast<JDIMENSION>(image.height());
  cinfo.input_components = Image::kChannels;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPROW>(image.row(static_cast<int>(cinfo.next_scanline)).data());
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return out;
}

}  // namespace

ImageFormat format_for_path(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return ImageFormat::kPng;
  if (ext == ".jpg" || ext == ".jpeg") return ImageFormat::kJpeg;
  throw Error(Errc::kDecodeError, "unsupported image extension: " + path.string());
}

bool is_supported_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width());
  desc.height = static_cast<png_uint_32>(image.height());
  desc.format = PNG_FORMAT_RGB;
  const auto stride = static_cast<png_int_32>(image.row_bytes());
  // Worst-case bound up front so the image is compressed once, not sized then written.
  png_alloc_size_t size = PNG_IMAGE_PNG_SIZE_MAX(desc);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.pixels().data(), stride,
                                 nullptr)) {
    throw Error(Errc::kIoError, std::string("png encode: ") + desc.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
    throw Error(Errc::kDecodeError, std::string("png decode: ") + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  Image image(static_cast<int>(desc.width), static_cast<int>(desc.height));
  if (!png_image_finish_read(&desc, nullptr, image.pixels().data(),
                             static_cast<png_int_32>(image.row_bytes()), nullptr)) {
    png_image_free(&desc);
    throw Error(Errc::kDecodeError, std::string("png decode: ") + desc.message);
  }
  return image;
}

Image read_image(const std::filesystem::path& path) {
  const ImageFormat format = format_for_path(path);
  const auto bytes = read_bytes(path);
  try {
    if (format == ImageFormat::kPng) return decode_png(bytes);
    return decode_jpeg(bytes, path.string());
  } catch (const Error& e) {
    if (e.code() == Errc::kDecodeError) {
      throw Error(Errc::kDecodeError, path.string() + " (" + e.what() + ")");
    }
    throw;
  }
}

void write_image(const Image& image, const std::filesystem::path& path, int jpeg_quality) {
  if (image.empty()) throw Error(Errc::kIoError, "refusing to write empty image " + path.string());
  if (format_for_path(path) == ImageFormat::kPng) {
    write_bytes(path, encode_png(image));
  } else {
    write_bytes(path, encode_jpeg(image, jpeg_quality));
  }
}

}  // namespace t2sgrid
