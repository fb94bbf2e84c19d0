#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "dcfm/common/errors.hpp"
#include "dcfm/datagen/image.hpp"
#include "dcfm/metrics.hpp"

namespace dcfm::datagen {

namespace {

std::vector<unsigned char> header(const char* magic, std::size_t w, std::size_t h) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(metrics::quantize_8bit(v)); }

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError(path.string() + ": write failed");
}

struct Parsed {
  std::size_t width = 0, height = 0;
  std::vector<unsigned char> payload;
};

Parsed parse(const std::filesystem::path& path, const char* magic, std::size_t channels) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    throw IoError(path.string() + ": bad magic number, expected " + magic);
  }
  pos = 2;
  auto next_field = [&](const char* what) -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) value = value * 10 + (bytes[pos++] - '0');
    if (pos == start) throw IoError(path.string() + ": malformed header, missing " + what);
    return value;
  };
  Parsed p;
  p.width = next_field("width");
  p.height = next_field("height");
  const std::size_t maxval = next_field("maxval");
  if (maxval != 255) throw IoError(path.string() + ": unsupported maxval " + std::to_string(maxval) + " (need 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(path.string() + ": malformed header");
  ++pos;  // single whitespace before the raster
  const std::size_t need = p.width * p.height * channels;
  if (bytes.size() - pos < need) {
    throw IoError(path.string() + ": truncated payload, " + std::to_string(bytes.size() - pos) + " of " +
                  std::to_string(need) + " bytes");
  }
  p.payload.assign(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + need));
  return p;
}

}  // namespace

std::vector<unsigned char> encode_pgm(const GrayImage& image) {
  auto out = header("P5", image.width, image.height);
  for (double v : image.pixels) out.push_back(to_byte(v));
  return out;
}

std::vector<unsigned char> encode_ppm(const RgbImage& image) {
  auto out = header("P6", image.width, image.height);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.push_back(to_byte(image.at(c, x, y)));
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) { write_bytes(path, encode_pgm(image)); }
void write_ppm(const std::filesystem::path& path, const RgbImage& image) { write_bytes(path, encode_ppm(image)); }

GrayImage read_pgm(const std::filesystem::path& path) {
  const Parsed p = parse(path, "P5", 1);
  GrayImage img(p.width, p.height);
  for (std::size_t i = 0; i < p.payload.size(); ++i) img.pixels[i] = p.payload[i] / 255.0;
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const Parsed p = parse(path, "P6", 3);
  RgbImage img(p.width, p.height);
  std::size_t i = 0;
  for (std::size_t y = 0; y < p.height; ++y)
    for (std::size_t x = 0; x < p.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, x, y) = p.payload[i++] / 255.0;
  return img;
}

}  // namespace dcfm::datagen
