#include "voxport/manifest.hpp"

#include <sstream>

#include "voxport/errors.hpp"
#include "voxport/kvfile.hpp"
#include "voxport/ply.hpp"

namespace voxport {

SequenceManifest SequenceManifest::read(const std::filesystem::path& path) {
  const auto kv = KeyValueFile::read(path);
  const auto base = path.parent_path();
  SequenceManifest m;

  const auto count = parse_longs(kv.at("frames"), "frames");
  if (count.size() != 1 || count[0] < 0) throw ParseError(path.string() + ": 'frames' must be a count");
  for (long t = 0; t < count[0]; ++t) {
    const std::string key = "frame." + std::to_string(t);
    m.frames.push_back(base / kv.at(key));
  }

  const auto box = parse_doubles(kv.at("bbox"), "bbox");
  if (box.size() != 6) throw ParseError(path.string() + ": 'bbox' needs 6 numbers");
  m.global_bbox = Box{{box[0], box[1], box[2]}, {box[3], box[4], box[5]}};

  const auto grid = parse_longs(kv.at("grid"), "grid");
  if (grid.size() != 3) throw ParseError(path.string() + ": 'grid' needs 3 integers");
  m.grid = GridDims{static_cast<int>(grid[0]), static_cast<int>(grid[1]), static_cast<int>(grid[2])};
  if (m.grid.gx < 1 || m.grid.gy < 1 || m.grid.gz < 1) throw ParseError(path.string() + ": grid dims must be >= 1");

  if (const auto* t = kv.find("trajectory")) m.trajectory = base / *t;
  if (const auto* l = kv.find("labels")) m.labels = base / *l;
  return m;
}

void SequenceManifest::write(const std::filesystem::path& path) const {
  KeyValueFile kv;
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return (base.empty() ? p : p.lexically_relative(base)).generic_string();
  };
  kv.set("frames", std::to_string(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) kv.set("frame." + std::to_string(t), rel(frames[t]));
  std::ostringstream box;
  box.precision(17);
  box << global_bbox.min.x << ' ' << global_bbox.min.y << ' ' << global_bbox.min.z << ' ' << global_bbox.max.x
      << ' ' << global_bbox.max.y << ' ' << global_bbox.max.z;
  kv.set("bbox", box.str());
  kv.set("grid", std::to_string(grid.gx) + " " + std::to_string(grid.gy) + " " + std::to_string(grid.gz));
  if (!trajectory.empty()) kv.set("trajectory", rel(trajectory));
  if (!labels.empty()) kv.set("labels", rel(labels));
  kv.write(path);
}

std::vector<PointCloudFrame> SequenceManifest::load_frames() const {
  std::vector<PointCloudFrame> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto f = load_ply(frames[t], t);
    f.frame_index = t;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace voxport
