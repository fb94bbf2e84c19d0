#include "dcfm/backbone/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "dcfm/common/errors.hpp"

namespace dcfm::backbone {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    throw IoError(path.string() + ": truncated checkpoint while reading " + what);
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string() + ": cannot open checkpoint for writing");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(os, kCheckpointVersion);
  for (const auto& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
    for (auto e : p.value.shape()) put_u32(os, static_cast<std::uint32_t>(e));
    os.write(reinterpret_cast<const char*>(p.value.data().data()),
             static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
  }
  if (!os) throw IoError(path.string() + ": write failed");
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open checkpoint");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IoError(path.string() + ": bad checkpoint magic (expected DCFMCKPT)");
  }
  const auto version = get_u32(is, path, "version");
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::vector<NamedArray> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    NamedArray a;
    const auto len = get_u32(is, path, "name length");
    a.name.resize(len);
    if (!is.read(a.name.data(), len)) throw IoError(path.string() + ": truncated parameter name");
    const auto rank = get_u32(is, path, "rank");
    if (rank > 4) throw IoError(path.string() + ": parameter " + a.name + " has rank " + std::to_string(rank));
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(get_u32(is, path, "extent"));
    a.values.resize(tl::numel_of(a.shape));
    if (!is.read(reinterpret_cast<char*>(a.values.data()),
                 static_cast<std::streamsize>(a.values.size() * sizeof(double)))) {
      throw IoError(path.string() + ": truncated payload for parameter " + a.name);
    }
    out.push_back(std::move(a));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, ParameterList& params) {
  auto arrays = read_checkpoint(path);
  std::map<std::string, NamedArray*> by_name;
  for (auto& a : arrays) by_name[a.name] = &a;
  if (arrays.size() != params.size()) {
    throw IoError(path.string() + ": checkpoint holds " + std::to_string(arrays.size()) +
                  " parameters, model has " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw IoError(path.string() + ": missing parameter " + p.name);
    if (it->second->shape != p.value.shape()) {
      throw IoError(path.string() + ": parameter " + p.name + " has shape " + tl::to_string(it->second->shape) +
                    ", model expects " + tl::to_string(p.value.shape()));
    }
    std::copy(it->second->values.begin(), it->second->values.end(), p.value.mutable_data().begin());
  }
}

}  // namespace dcfm::backbone
