#include <algorithm>

#include "dcfm/common/errors.hpp"
#include "dcfm/datagen/generator.hpp"

namespace fs = std::filesystem;

namespace dcfm::datagen {

void write_group(const fs::path& root, const GroupSample& group) {
  const fs::path dir = root / group.group_id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < group.images.size(); ++i) {
    std::string stem = std::to_string(i);
    stem.insert(0, stem.size() < 3 ? 3 - stem.size() : 0, '0');
    write_ppm(dir / (stem + ".ppm"), group.images[i]);
    if (i < group.masks.size()) write_pgm(dir / (stem + "_gt.pgm"), group.masks[i]);
  }
}

std::vector<GroupFiles> list_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IoError("dataset root " + root.string() + " is not a directory");
  std::vector<GroupFiles> groups;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    GroupFiles g;
    g.group_id = entry.path().filename().string();
    for (const auto& file : fs::directory_iterator(entry.path())) {
      if (file.is_regular_file() && file.path().extension() == ".ppm") g.stems.push_back(file.path().stem().string());
    }
    if (g.stems.empty()) continue;
    std::sort(g.stems.begin(), g.stems.end());
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(), [](const GroupFiles& a, const GroupFiles& b) { return a.group_id < b.group_id; });
  return groups;
}

}  // namespace dcfm::datagen
