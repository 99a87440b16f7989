#pragma once

#include "fvv/common.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fvv {

// Interleaved row-major image. Pixel (x, y) has its center at integer
// coordinates, matching the projection convention in calib.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  bool same_size(int w, int h) const { return width == w && height == h; }

  friend bool operator==(const Image&, const Image&) = default;
};

using ColorImage = Image<std::uint8_t>;

// Binary image, one byte per pixel holding 0 or 1.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

// Intersection-over-union of the foreground sets; 1 when both are empty.
double iou(const Mask& a, const Mask& b);

// Image files. Any format OpenCV's imgcodecs reads is accepted; the library
// itself writes PPM/PGM/PNG depending on the extension. Color images are
// kept in RGB channel order in memory.
ColorImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ColorImage& img);

// Nonzero pixel (any channel) means foreground.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

// 16-bit single-channel export.
void write_image16(const std::filesystem::path& path, const Image<std::uint16_t>& img);

}  // namespace fvv
