#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "voxport/core.hpp"
#include "voxport/manifest.hpp"
#include "voxport/trajectory.hpp"

namespace voxport {

enum class ViewerPath { orbit, line };

/// A furnished room with one moving colored cube that every viewer tracks.
struct SyntheticSceneSpec {
  std::size_t frames = 10;
  std::size_t users = 8;
  std::uint64_t seed = 7;
  Box room{{-3.0, 0.0, -3.0}, {3.0, 3.0, 3.0}};
  double shell_density = 320.0;  // points per square meter of wall, floor and ceiling
  std::size_t static_objects = 4;
  std::size_t object_points = 1500;
  std::size_t moving_points = 3000;
  double moving_size = 0.6;
  Color moving_color{220, 30, 30};
  Vec3 moving_start{-1.5, 1.0, 1.8};
  Vec3 velocity{0.3, 0.0, 0.0};  // meters per frame
  ViewerPath path = ViewerPath::orbit;
  Vec3 viewer_center{0.0, 1.6, -0.5};
  double viewer_spread = 0.3;    // radius of the viewer ring
  double noise_deg = 2.0;        // gaze jitter, standard deviation
  GridDims grid{2, 3, 2};
};

struct SyntheticScene {
  std::vector<PointCloudFrame> frames;
  std::vector<TrajectoryRow> trajectories;
  Box bbox;
  GridDims grid;
};

/// Deterministic given `spec`. Static geometry and the moving cube's shape are
/// fixed across frames; only the cube's offset and the viewers change.
SyntheticScene generate_scene(const SyntheticSceneSpec& spec);

/// Writes frame_NNN.ply (binary), trajectory.csv and manifest.txt into `dir`.
SequenceManifest write_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

/// Two frames of one anisotropic Gaussian blob with random colors: the second
/// is the first translated by `shift`, shuffled, with Gaussian color noise of
/// `color_noise` channel units.
std::pair<PointCloudFrame, PointCloudFrame> translated_pair(std::size_t n, Vec3 shift, double color_noise,
                                                            std::uint64_t seed);

/// Yaw and pitch (alpha, beta; roll 0) that point the view axis along `dir`.
HeadState look_at(Vec3 eye, Vec3 target);

}  // namespace voxport
