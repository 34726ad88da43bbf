#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace homing {

/// Row-major grayscale image with float pixels, nominally in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int rows, int cols, float fill = 0.0f);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  float& at(int r, int c) { return pixels_[static_cast<std::size_t>(r) * cols_ + c]; }
  float at(int r, int c) const { return pixels_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<float> pixels() { return pixels_; }
  std::span<const float> pixels() const { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<float> pixels_;
};

/// Binary 8-bit PGM (P5). Values are clamped to [0,1] and rounded to 0..255.
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

double mean_absolute_difference(const GrayImage& a, const GrayImage& b);

}  // namespace homing
