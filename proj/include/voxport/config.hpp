#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxport/core.hpp"
#include "voxport/kvfile.hpp"
#include "voxport/viewport.hpp"

namespace voxport {

/// Everything the train and predict pipeline reads. Defaults are the
/// full-size network; configs/toy.cfg holds the small CI variant.
struct PipelineConfig {
  std::size_t tiles = 12;
  GridDims grid{2, 3, 2};
  std::size_t points = 12288;  // N per sampled tile
  std::size_t cubes = 512;     // N_c URS cubes per tile
  std::size_t batch = 4;       // tile pairs per optimizer step
  std::size_t k = 16;
  std::vector<std::size_t> widths{8, 32, 128, 256, 512, 1024};
  FovParams fov;
  double tau = 0.1;
  int freq_threshold = 5;
  std::uint64_t seed = 0;

  std::size_t steps = 300;
  double lr = 5e-3;
  double dropout = 0.5;
  std::size_t test_frames = 2;  // the last frames of a sequence are held out

  std::size_t traj_hidden = 32;
  std::size_t traj_window = 4;
  std::size_t traj_steps = 300;
  double traj_lr = 1e-2;

  std::string scene;  // optional default sequence manifest

  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;

  KeyValueFile to_kv() const;
  /// Missing keys keep their defaults; unknown keys are a ParseError.
  static PipelineConfig from_kv(const KeyValueFile& kv);
  std::string dump() const { return to_kv().dump(); }
  static PipelineConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const { to_kv().write(path); }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

}  // namespace voxport
