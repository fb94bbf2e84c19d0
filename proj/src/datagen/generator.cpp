#include "dcfm/datagen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dcfm/common/errors.hpp"
#include "dcfm/common/rng.hpp"

namespace dcfm::datagen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSquareHalfSide = std::numbers::sqrt2 / 2.0;  // square inscribed in the circle
constexpr double kRingInner = 0.55;

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

Placement random_placement(const GenConfig& cfg, ShapeClass shape, Rng& rng) {
  const double side = static_cast<double>(cfg.image_size);
  Placement p;
  p.shape = shape;
  p.radius = rng.uniform(cfg.min_scale, cfg.max_scale) * side;
  p.cx = rng.uniform(p.radius, side - p.radius);
  p.cy = rng.uniform(p.radius, side - p.radius);
  p.angle = rng.uniform(0.0, kTwoPi);
  p.color = hsv_to_rgb(rng.uniform(), rng.uniform(0.6, 1.0), rng.uniform(0.55, 1.0));
  return p;
}

bool overlaps(const Placement& a, const Placement& b) {
  const double dx = a.cx - b.cx, dy = a.cy - b.cy;
  const double reach = a.radius + b.radius + 1.0;
  return dx * dx + dy * dy < reach * reach;
}

}  // namespace

std::string to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::Disk: return "disk";
    case ShapeClass::Square: return "square";
    case ShapeClass::Triangle: return "triangle";
    case ShapeClass::Ring: return "ring";
  }
  return "unknown";
}

ShapeClass parse_shape_class(const std::string& name) {
  for (auto c : kAllShapeClasses)
    if (to_string(c) == name) return c;
  throw ConfigError("unknown shape class '" + name + "'");
}

void GenConfig::validate() const {
  if (group_size < 2) throw ConfigError("group size must be at least 2");
  if (image_size == 0 || image_size % 16 != 0) throw ConfigError("image size must be a positive multiple of 16");
  if (classes.empty()) throw ConfigError("at least one shape class is required");
  if (min_distractors > max_distractors) throw ConfigError("min distractors exceeds max distractors");
  if (max_distractors > 0 && classes.size() < 2) throw ConfigError("distractors need a second shape class");
  if (!(min_scale > 0.0 && min_scale <= max_scale && max_scale < 0.5)) throw ConfigError("scale range must satisfy 0 < min <= max < 0.5");
  if (noise < 0.0) throw ConfigError("noise must be non-negative");
}

bool shape_contains(const Placement& p, double x, double y) {
  const double dx = x - p.cx, dy = y - p.cy;
  const double d2 = dx * dx + dy * dy;
  switch (p.shape) {
    case ShapeClass::Disk:
      return d2 <= p.radius * p.radius;
    case ShapeClass::Ring:
      return d2 <= p.radius * p.radius && d2 >= kRingInner * kRingInner * p.radius * p.radius;
    case ShapeClass::Square: {
      const double c = std::cos(p.angle), s = std::sin(p.angle);
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      const double h = kSquareHalfSide * p.radius;
      return std::abs(u) <= h && std::abs(v) <= h;
    }
    case ShapeClass::Triangle: {
      // Equilateral: inside when every edge's inward normal test passes.
      // Edge normals point at angle + pi/3 + k*2pi/3, apothem r/2.
      for (int k = 0; k < 3; ++k) {
        const double theta = p.angle + std::numbers::pi / 3.0 + k * kTwoPi / 3.0;
        if (std::cos(theta) * dx + std::sin(theta) * dy > 0.5 * p.radius) return false;
      }
      return true;
    }
  }
  return false;
}

GrayImage rasterize_mask(const std::vector<Placement>& placements, std::size_t size) {
  GrayImage mask(size, size);
  for (const auto& p : placements) {
    if (!p.cosalient) continue;
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x)
        if (shape_contains(p, x + 0.5, y + 0.5)) mask.at(x, y) = 1.0;
  }
  return mask;
}

GroupSample generate_group(const GenConfig& cfg, ShapeClass shape, std::uint64_t seed, const std::string& group_id) {
  cfg.validate();
  if (std::find(cfg.classes.begin(), cfg.classes.end(), shape) == cfg.classes.end()) {
    throw ConfigError("shape class '" + to_string(shape) + "' is not enabled in this configuration");
  }
  std::vector<ShapeClass> others;
  for (auto c : cfg.classes)
    if (c != shape) others.push_back(c);

  Rng rng(seed);
  GroupSample g;
  g.group_id = group_id.empty() ? to_string(shape) : group_id;
  g.shape = shape;
  const std::size_t side = cfg.image_size;
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    Placement target = random_placement(cfg, shape, rng);
    target.cosalient = true;
    std::vector<Placement> scene;
    const auto want = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(cfg.min_distractors),
                                                           static_cast<std::int64_t>(cfg.max_distractors)));
    for (std::size_t d = 0; d < want; ++d) {
      const ShapeClass cls = others[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(others.size()) - 1))];
      for (int attempt = 0; attempt < 50; ++attempt) {
        Placement p = random_placement(cfg, cls, rng);
        const bool clear = !overlaps(p, target) &&
                           std::none_of(scene.begin(), scene.end(), [&](const Placement& q) { return overlaps(p, q); });
        if (clear) {
          scene.push_back(p);
          break;
        }
      }
    }
    scene.push_back(target);

    // Background: vertical blend of two muted colours plus pixel noise.
    const auto top = hsv_to_rgb(rng.uniform(), rng.uniform(0.0, 0.3), rng.uniform(0.2, 0.8));
    const auto bottom = hsv_to_rgb(rng.uniform(), rng.uniform(0.0, 0.3), rng.uniform(0.2, 0.8));
    RgbImage img(side, side);
    for (std::size_t y = 0; y < side; ++y) {
      const double t = (y + 0.5) / static_cast<double>(side);
      for (std::size_t x = 0; x < side; ++x)
        for (std::size_t c = 0; c < 3; ++c) img.at(c, x, y) = (1.0 - t) * top[c] + t * bottom[c];
    }
    for (const auto& p : scene)
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
          if (shape_contains(p, x + 0.5, y + 0.5))
            for (std::size_t c = 0; c < 3; ++c) img.at(c, x, y) = p.color[c];
    for (auto& v : img.planes) v = std::clamp(v + cfg.noise * rng.uniform(-1.0, 1.0), 0.0, 1.0);

    g.images.push_back(std::move(img));
    g.masks.push_back(rasterize_mask(scene, side));
    g.placements.push_back(std::move(scene));
  }
  return g;
}

SyntheticDataset::SyntheticDataset(GenConfig cfg, std::size_t groups, std::uint64_t seed)
    : cfg_(std::move(cfg)), groups_(groups), seed_(seed) {
  cfg_.validate();
  if (groups_ == 0) throw ConfigError("synthetic dataset needs at least one group");
}

ShapeClass SyntheticDataset::class_of(std::size_t group) const { return cfg_.classes[group % cfg_.classes.size()]; }

std::string SyntheticDataset::id_of(std::size_t group) const {
  std::string idx = std::to_string(group);
  idx.insert(0, idx.size() < 3 ? 3 - idx.size() : 0, '0');
  return to_string(class_of(group)) + "_" + idx;
}

std::uint64_t SyntheticDataset::training_seed(std::size_t group, std::size_t epoch) const {
  return mix_seed(mix_seed(seed_, group), epoch) & (kValidationBit - 1);
}

std::uint64_t SyntheticDataset::validation_seed(std::size_t group) const {
  return mix_seed(seed_ ^ 0x5eed5eed5eedULL, group) | kValidationBit;
}

GroupSample SyntheticDataset::training_group(std::size_t group, std::size_t epoch) const {
  return generate_group(cfg_, class_of(group), training_seed(group, epoch), id_of(group));
}

GroupSample SyntheticDataset::validation_group(std::size_t group) const {
  return generate_group(cfg_, class_of(group), validation_seed(group), id_of(group));
}

}  // namespace dcfm::datagen
