#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxport/core.hpp"

namespace voxport {

enum class SamplingMethod { URS, FPS, RS, IDIS, GS, VS };

std::string_view to_string(SamplingMethod m);
/// Case-insensitive; throws std::invalid_argument on unknown names.
SamplingMethod parse_sampling_method(std::string_view name);

struct SampledTile {
  int tile_id = 0;
  std::size_t frame_index = 0;
  std::vector<std::size_t> point_indices;
  std::vector<std::size_t> centers;  // URS central points; empty for baselines
};

// Neighborhood sizes used by the IDIS density score and the GS normal fit.
inline constexpr std::size_t kDensityNeighbors = 16;
inline constexpr std::size_t kNormalNeighbors = 16;

/// Uniform-random sampling of one tile.
///
/// The tile's bounding box is cut into `cubes` equal sub-boxes, arranged as the
/// factorization of `cubes` closest to the box's aspect ratio. In every
/// non-empty sub-box a location is drawn uniformly over its volume and snapped
/// to the nearest tile point inside that sub-box; that point is the center.
/// Empty sub-boxes hand their quota to the nearest non-empty one. Each center
/// then collects its quota of nearest not-yet-taken tile points, so the result
/// has exactly `n` distinct indices into `tile`.
///
/// The draw depends on geometry and the seed only, never on point order, so two
/// mapped tiles sampled with the same seed pick corresponding regions.
///
/// Throws InsufficientPointsError when tile.size() < n and std::invalid_argument
/// when n is not a multiple of `cubes`.
SampledTile urs_sample(std::span<const Point> tile, std::size_t n, std::size_t cubes, std::uint64_t seed);

/// FPS, RS, IDIS, GS or VS. Returns exactly `n` distinct indices into `tile`.
SampledTile baseline_sample(std::span<const Point> tile, std::size_t n, SamplingMethod method, std::uint64_t seed);

/// Dispatches to urs_sample or baseline_sample.
SampledTile sample(std::span<const Point> tile, std::size_t n, SamplingMethod method, std::size_t cubes,
                   std::uint64_t seed);

/// Samples tile `tile_id` of a tiled frame and rewrites the indices so they
/// refer to the frame's points.
SampledTile sample_frame_tile(const PointCloudFrame& frame, const TiledFrame& tiled, int tile_id, std::size_t n,
                              SamplingMethod method, std::size_t cubes, std::uint64_t seed);

struct DacvvContext {
  double d_max = 1.0;  // largest coordinate distance inside the reference tile
  double c_max = 1.0;  // largest color distance inside the reference tile

  /// Exact diameters of the tile in position and color space. Throws
  /// std::invalid_argument when either is zero.
  static DacvvContext from_tile(std::span<const Point> tile);
};

/// Largest pairwise distance of a 3-d point set (exact).
double diameter(std::span<const Vec3> points);

double dacvv(const Point& a, const Point& b, const DacvvContext& ctx);

/// For every sampled point of frame t, the smallest DaCVV to any sampled point
/// of frame t-1.
std::vector<double> min_dacvv(std::span<const Point> tile_t, const SampledTile& sampled_t,
                              std::span<const Point> tile_prev, const SampledTile& sampled_prev,
                              const DacvvContext& ctx);

/// Fraction of frame-t samples that have a frame-(t-1) sample with DaCVV below
/// `threshold`. Throws std::invalid_argument on mismatched tile ids or a
/// negative threshold.
double ifmi(std::span<const Point> tile_t, const SampledTile& sampled_t, std::span<const Point> tile_prev,
            const SampledTile& sampled_prev, double threshold, const DacvvContext& ctx);

std::vector<double> ifmi_curve(std::span<const Point> tile_t, const SampledTile& sampled_t,
                               std::span<const Point> tile_prev, const SampledTile& sampled_prev,
                               std::span<const double> thresholds, const DacvvContext& ctx);

}  // namespace voxport
