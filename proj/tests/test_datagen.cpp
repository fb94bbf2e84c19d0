#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"

#include "dcfm/common/errors.hpp"
#include "dcfm/datagen/generator.hpp"
#include "dcfm/metrics.hpp"
#include "test_support.hpp"

using namespace dcfm;
using namespace dcfm::datagen;
using dcfm::testing::read_bytes;
using dcfm::testing::TempDir;
using dcfm::testing::write_bytes;

namespace {

double cross(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Independent rasteriser: polygons through explicit vertices and
// half-plane tests, circles through distances.
bool rerender_contains(const Placement& p, double x, double y) {
  const double dx = x - p.cx, dy = y - p.cy;
  const double r2 = dx * dx + dy * dy;
  switch (p.shape) {
    case ShapeClass::Disk:
      return r2 <= p.radius * p.radius;
    case ShapeClass::Ring:
      return r2 <= p.radius * p.radius && r2 >= 0.55 * 0.55 * p.radius * p.radius;
    case ShapeClass::Square:
    case ShapeClass::Triangle: {
      const int k = p.shape == ShapeClass::Square ? 4 : 3;
      // Square corners sit at 45 degrees from its axes; triangle vertices
      // are opposite the edge normals.
      const double offset = p.shape == ShapeClass::Square ? std::numbers::pi / 4 : 0.0;
      std::vector<double> vx, vy;
      for (int i = 0; i < k; ++i) {
        const double t = p.angle + offset + i * 2.0 * std::numbers::pi / k;
        vx.push_back(p.cx + p.radius * std::cos(t));
        vy.push_back(p.cy + p.radius * std::sin(t));
      }
      bool pos = false, neg = false;
      for (int i = 0; i < k; ++i) {
        const double c = cross(vx[i], vy[i], vx[(i + 1) % k], vy[(i + 1) % k], x, y);
        pos = pos || c > 1e-9;
        neg = neg || c < -1e-9;
      }
      return !(pos && neg);
    }
  }
  return false;
}

GenConfig small_config() {
  GenConfig c;
  c.group_size = 4;
  c.image_size = 32;
  return c;
}

}  // namespace

TEST_CASE("shape class names") {
  for (auto c : kAllShapeClasses) CHECK(parse_shape_class(to_string(c)) == c);
  CHECK_THROWS_AS(parse_shape_class("hexagon"), ConfigError);
}

TEST_CASE("config validation") {
  GenConfig c;
  CHECK_NOTHROW(c.validate());
  c.group_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GenConfig{};
  c.image_size = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GenConfig{};
  c.min_distractors = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GenConfig{};
  c.classes = {ShapeClass::Disk};
  CHECK_THROWS_AS(generate_group(c, ShapeClass::Disk, 1), ConfigError);
  c.max_distractors = 0;
  CHECK_NOTHROW(generate_group(c, ShapeClass::Disk, 1));
  CHECK_THROWS_AS(generate_group(c, ShapeClass::Ring, 1), ConfigError);
}

TEST_CASE("generation is deterministic") {
  const auto a = generate_group(small_config(), ShapeClass::Triangle, 77);
  const auto b = generate_group(small_config(), ShapeClass::Triangle, 77);
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i].planes == b.images[i].planes);
    CHECK(a.masks[i].pixels == b.masks[i].pixels);
  }
  const auto c = generate_group(small_config(), ShapeClass::Triangle, 78);
  CHECK(a.images[0].planes != c.images[0].planes);
}

TEST_CASE("masks match an independent re-render of the recorded placements") {
  GenConfig cfg;
  cfg.group_size = 6;
  cfg.max_distractors = 3;
  for (auto cls : kAllShapeClasses) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = generate_group(cfg, cls, 1000 + seed);
      REQUIRE(g.images.size() == cfg.group_size);
      for (std::size_t i = 0; i < cfg.group_size; ++i) {
        const auto& placements = g.placements[i];
        std::size_t shared = 0;
        for (const auto& p : placements) {
          if (p.cosalient) {
            ++shared;
            CHECK(p.shape == cls);
          } else {
            CHECK(p.shape != cls);
          }
        }
        CHECK(shared == 1);
        double inter = 0, uni = 0, area = 0;
        for (std::size_t y = 0; y < cfg.image_size; ++y)
          for (std::size_t x = 0; x < cfg.image_size; ++x) {
            bool truth = false;
            for (const auto& p : placements) truth = truth || (p.cosalient && rerender_contains(p, x + 0.5, y + 0.5));
            const double m = g.masks[i].at(x, y);
            CHECK((m == 0.0 || m == 1.0));
            inter += truth && m == 1.0;
            uni += truth || m == 1.0;
            area += truth;
          }
        CHECK(area > 0);
        CHECK(inter == uni);
      }
    }
  }
}

TEST_CASE("without distractors the mask covers the only object") {
  GenConfig cfg = small_config();
  cfg.max_distractors = 0;
  cfg.noise = 0.0;
  const auto g = generate_group(cfg, ShapeClass::Square, 5);
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    REQUIRE(g.placements[i].size() == 1);
    const auto& p = g.placements[i][0];
    for (std::size_t y = 0; y < cfg.image_size; ++y)
      for (std::size_t x = 0; x < cfg.image_size; ++x) {
        const bool inside = g.masks[i].at(x, y) == 1.0;
        CHECK(inside == rerender_contains(p, x + 0.5, y + 0.5));
        if (inside)
          for (std::size_t c = 0; c < 3; ++c) CHECK(g.images[i].at(c, x, y) == p.color[c]);
      }
  }
}

TEST_CASE("synthetic dataset balance and split") {
  GenConfig cfg = small_config();
  const SyntheticDataset ds(cfg, 12, 3);
  std::map<ShapeClass, int> counts;
  for (std::size_t g = 0; g < ds.size(); ++g) ++counts[ds.class_of(g)];
  for (auto c : kAllShapeClasses) CHECK(counts[c] == 3);
  for (std::size_t g = 0; g < ds.size(); ++g) {
    CHECK(ds.validation_seed(g) >= SyntheticDataset::kValidationBit);
    for (std::size_t e = 0; e < 5; ++e) CHECK(ds.training_seed(g, e) < SyntheticDataset::kValidationBit);
    CHECK(ds.training_seed(g, 0) != ds.training_seed(g, 1));
  }
  CHECK(ds.id_of(5) == "square_005");
  CHECK(ds.training_group(5, 0).shape == ShapeClass::Square);
}

TEST_CASE("pgm format") {
  TempDir dir("pgm");
  SUBCASE("header and zero payload") {
    write_pgm(dir / "z.pgm", GrayImage(64, 64));
    const std::string bytes = read_bytes(dir / "z.pgm");
    const std::string header = "P5\n64 64\n255\n";
    CHECK(bytes.substr(0, header.size()) == header);
    CHECK(bytes.size() == header.size() + 4096);
    CHECK(bytes.substr(header.size()) == std::string(4096, '\0'));
  }
  SUBCASE("round trip equals 8-bit quantisation") {
    GrayImage img(5, 3);
    const auto v = dcfm::testing::random_values(15, 1, -0.2, 1.2);
    img.pixels = v;
    write_pgm(dir / "r.pgm", img);
    const auto back = read_pgm(dir / "r.pgm");
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    for (std::size_t i = 0; i < 15; ++i) CHECK(back.pixels[i] == metrics::quantize_8bit(v[i]) / 255.0);
  }
  SUBCASE("comments in the header are skipped") {
    write_bytes(dir / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + std::string("\x00\xff", 2));
    const auto img = read_pgm(dir / "c.pgm");
    CHECK(img.pixels == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("malformed files") {
    write_bytes(dir / "magic.pgm", "P2\n1 1\n255\n0");
    CHECK_THROWS_AS(read_pgm(dir / "magic.pgm"), IoError);
    write_bytes(dir / "maxval.pgm", std::string("P5\n1 1\n65535\n") + std::string(2, '\0'));
    CHECK_THROWS_AS(read_pgm(dir / "maxval.pgm"), IoError);
    write_bytes(dir / "short.pgm", std::string("P5\n4 4\n255\n") + std::string(10, '\0'));
    CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), IoError);
    CHECK_THROWS_AS(read_pgm(dir / "absent.pgm"), IoError);
    try {
      read_pgm(dir / "short.pgm");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("ppm round trip") {
    RgbImage img(4, 2);
    img.planes = dcfm::testing::random_values(24, 2, 0.0, 1.0);
    write_ppm(dir / "c.ppm", img);
    CHECK(read_bytes(dir / "c.ppm").substr(0, 11) == "P6\n4 2\n255\n");
    const auto back = read_ppm(dir / "c.ppm");
    for (std::size_t i = 0; i < 24; ++i) CHECK(back.planes[i] == metrics::quantize_8bit(img.planes[i]) / 255.0);
    CHECK_THROWS_AS(read_pgm(dir / "c.ppm"), IoError);
  }
}

TEST_CASE("dataset directory layout") {
  TempDir dir("layout");
  const auto g = generate_group(small_config(), ShapeClass::Ring, 9, "ring_group");
  write_group(dir.path(), g);
  CHECK(std::filesystem::exists(dir / "ring_group/000.ppm"));
  CHECK(std::filesystem::exists(dir / "ring_group/003_gt.pgm"));
  const auto listed = list_dataset(dir.path());
  REQUIRE(listed.size() == 1);
  CHECK(listed[0].group_id == "ring_group");
  CHECK(listed[0].stems == std::vector<std::string>{"000", "001", "002", "003"});
  CHECK(read_pgm(dir / "ring_group/002_gt.pgm").pixels == g.masks[2].pixels);
  CHECK_THROWS_AS(list_dataset(dir / "nowhere"), IoError);
}
