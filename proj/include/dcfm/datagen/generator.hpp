// Synthetic co-salient groups. Every image of a group shows one instance of
// the group's shape class (random size, position, rotation and colour) and
// a few distractors drawn from the other classes. Masks mark exactly the
// co-salient instance.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcfm/datagen/image.hpp"

namespace dcfm::datagen {

enum class ShapeClass { Disk, Square, Triangle, Ring };

inline constexpr std::array<ShapeClass, 4> kAllShapeClasses{ShapeClass::Disk, ShapeClass::Square,
                                                            ShapeClass::Triangle, ShapeClass::Ring};

std::string to_string(ShapeClass c);
// Throws ConfigError for unknown names.
ShapeClass parse_shape_class(const std::string& name);

struct GenConfig {
  std::size_t group_size = 16;
  std::size_t image_size = 64;
  std::vector<ShapeClass> classes{kAllShapeClasses.begin(), kAllShapeClasses.end()};
  std::size_t min_distractors = 0;
  std::size_t max_distractors = 2;
  // Circumradius range as a fraction of the image side.
  double min_scale = 0.14;
  double max_scale = 0.26;
  double noise = 0.03;

  // Throws ConfigError.
  void validate() const;
};

struct Placement {
  ShapeClass shape = ShapeClass::Disk;
  double cx = 0.0, cy = 0.0;  // pixel units
  double radius = 1.0;        // circumradius
  double angle = 0.0;         // radians
  std::array<double, 3> color{};
  bool cosalient = false;
};

// Point-in-shape test at (x, y) in continuous pixel coordinates.
bool shape_contains(const Placement& p, double x, double y);

struct GroupSample {
  std::string group_id;
  ShapeClass shape = ShapeClass::Disk;
  std::vector<RgbImage> images;
  std::vector<GrayImage> masks;
  // Per image, drawing order (distractors first, co-salient instance last).
  std::vector<std::vector<Placement>> placements;
};

GroupSample generate_group(const GenConfig& cfg, ShapeClass shape, std::uint64_t seed,
                           const std::string& group_id = {});

// Mask of a placement list: pixel centres inside the co-salient instance.
GrayImage rasterize_mask(const std::vector<Placement>& placements, std::size_t size);

// Fixed pool of synthetic groups. Group i has class classes[i % k]; each
// (group, epoch) pair draws fresh images, like sampling N images from a
// large real group. Validation seeds occupy a disjoint range.
class SyntheticDataset {
 public:
  SyntheticDataset(GenConfig cfg, std::size_t groups, std::uint64_t seed);

  std::size_t size() const { return groups_; }
  const GenConfig& config() const { return cfg_; }
  ShapeClass class_of(std::size_t group) const;
  std::string id_of(std::size_t group) const;
  std::uint64_t training_seed(std::size_t group, std::size_t epoch) const;
  std::uint64_t validation_seed(std::size_t group) const;

  GroupSample training_group(std::size_t group, std::size_t epoch) const;
  GroupSample validation_group(std::size_t group) const;

  static constexpr std::uint64_t kValidationBit = std::uint64_t{1} << 62;

 private:
  GenConfig cfg_;
  std::size_t groups_;
  std::uint64_t seed_;
};

// <root>/<group_id>/<idx>.ppm and <idx>_gt.pgm
void write_group(const std::filesystem::path& root, const GroupSample& group);

struct GroupFiles {
  std::string group_id;
  std::vector<std::string> stems;  // "<idx>" sorted by name
};

// Groups under a dataset root, sorted by id; a stem is listed when its
// .ppm exists (ground truth is optional, e.g. for inference).
std::vector<GroupFiles> list_dataset(const std::filesystem::path& root);

}  // namespace dcfm::datagen
