#include "fvv/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cstring>

namespace fvv {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) throw Error("iou: mask size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] & b.bits[i]);
    uni += (a.bits[i] | b.bits[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

cv::Mat load(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw Error("cannot read image: " + path.string());
  if (m.depth() != CV_8U) throw Error("expected 8-bit image: " + path.string());
  return m;
}

void store(const std::filesystem::path& path, const cv::Mat& m) {
  if (!cv::imwrite(path.string(), m)) throw Error("cannot write image: " + path.string());
}

}  // namespace

ColorImage read_image(const std::filesystem::path& path) {
  cv::Mat m = load(path);
  ColorImage img;
  if (m.channels() == 1) {
    img = ColorImage(m.cols, m.rows, 1);
    for (int y = 0; y < m.rows; ++y)
      std::memcpy(&img.at(0, y), m.ptr<std::uint8_t>(y), static_cast<std::size_t>(m.cols));
    return img;
  }
  img = ColorImage(m.cols, m.rows, 3);
  for (int y = 0; y < m.rows; ++y) {
    const std::uint8_t* row = m.ptr<std::uint8_t>(y);
    const int step = m.channels();
    for (int x = 0; x < m.cols; ++x) {
      // BGR(A) on disk, RGB in memory.
      img.at(x, y, 0) = row[x * step + 2];
      img.at(x, y, 1) = row[x * step + 1];
      img.at(x, y, 2) = row[x * step + 0];
    }
  }
  return img;
}

void write_image(const std::filesystem::path& path, const ColorImage& img) {
  if (img.channels != 1 && img.channels != 3) throw Error("write_image: unsupported channel count");
  cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 1) {
        row[x] = img.at(x, y);
      } else {
        row[x * 3 + 0] = img.at(x, y, 2);
        row[x * 3 + 1] = img.at(x, y, 1);
        row[x * 3 + 2] = img.at(x, y, 0);
      }
    }
  }
  store(path, m);
}

Mask read_mask(const std::filesystem::path& path) {
  cv::Mat m = load(path);
  Mask mask(m.cols, m.rows);
  const int step = m.channels();
  for (int y = 0; y < m.rows; ++y) {
    const std::uint8_t* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      bool on = false;
      for (int c = 0; c < step; ++c) on = on || row[x * step + c] != 0;
      mask.set(x, y, on);
    }
  }
  return mask;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
  store(path, m);
}

void write_image16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
  if (img.channels != 1) throw Error("write_image16: single channel only");
  cv::Mat m(img.height, img.width, CV_16UC1);
  for (int y = 0; y < img.height; ++y)
    std::memcpy(m.ptr<std::uint16_t>(y), &img.at(0, y), sizeof(std::uint16_t) * img.width);
  store(path, m);
}

}  // namespace fvv
