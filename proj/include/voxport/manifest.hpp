#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voxport/core.hpp"

namespace voxport {

/// Sequence description: ordered frame files, the sequence-wide tiling box and
/// grid. Relative paths resolve against the manifest's directory.
struct SequenceManifest {
  std::vector<std::filesystem::path> frames;
  Box global_bbox;
  GridDims grid;
  std::filesystem::path trajectory;  // empty when absent
  std::filesystem::path labels;      // empty when absent

  static SequenceManifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  std::vector<PointCloudFrame> load_frames() const;
};

}  // namespace voxport
