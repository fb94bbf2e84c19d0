#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace dcfm::datagen {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // row-major, [0,1]

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), pixels(w * h, fill) {}
  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> planes;  // [3][H][W], [0,1]

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), planes(3 * w * h, 0.0) {}
  double& at(std::size_t c, std::size_t x, std::size_t y) { return planes[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t x, std::size_t y) const { return planes[(c * height + y) * width + x]; }
};

// Binary NetPBM: P5 grayscale / P6 color, maxval 255. Writers clamp to
// [0,1] and round half up; readers divide by 255. Malformed files raise
// IoError naming the file and the problem.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

// In-memory encoders, used by the file writers.
std::vector<unsigned char> encode_pgm(const GrayImage& image);
std::vector<unsigned char> encode_ppm(const RgbImage& image);

}  // namespace dcfm::datagen
