// Checkpoint container, little-endian:
//
//   "DCFMCKPT"                  8 bytes
//   version                     u32 (currently 1)
//   repeated until end of file:
//     name length               u32
//     name                      bytes, no terminator
//     rank                      u32
//     extents                   rank x u32
//     payload                   prod(extents) x float64 (IEEE 754)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcfm/common/parameters.hpp"

namespace dcfm::backbone {

inline constexpr char kCheckpointMagic[8] = {'D', 'C', 'F', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  tl::Shape shape;
  std::vector<double> values;
};

void write_checkpoint(const std::filesystem::path& path, const ParameterList& params);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into matching parameters. Every parameter must be
// present with an identical shape; extra checkpoint entries are an error too.
void load_checkpoint(const std::filesystem::path& path, ParameterList& params);

}  // namespace dcfm::backbone
