#include "voxport/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "voxport/errors.hpp"

namespace voxport {

double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

bool Box::contains(Vec3 p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

Box bounding_box(std::span<const Point> points) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box box{{inf, inf, inf}, {-inf, -inf, -inf}};
  for (const auto& p : points) {
    for (std::size_t a = 0; a < 3; ++a) {
      box.min[a] = std::min(box.min[a], p.position[a]);
      box.max[a] = std::max(box.max[a], p.position[a]);
    }
  }
  return box;
}

Box bounding_box(std::span<const PointCloudFrame> frames) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box box{{inf, inf, inf}, {-inf, -inf, -inf}};
  for (const auto& f : frames) {
    const Box b = bounding_box(f.points);
    for (std::size_t a = 0; a < 3; ++a) {
      box.min[a] = std::min(box.min[a], b.min[a]);
      box.max[a] = std::max(box.max[a], b.max[a]);
    }
  }
  return box;
}

double rgb_to_gray(Color c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

namespace {

int cell_along(double v, double lo, double hi, int cells) {
  const double ext = hi - lo;
  if (ext <= 0.0) return 0;
  const int i = static_cast<int>(std::floor((v - lo) / ext * cells));
  return std::clamp(i, 0, cells - 1);
}

}  // namespace

int tile_of(Vec3 p, GridDims grid, const Box& bbox) {
  if (!bbox.contains(p)) {
    std::ostringstream msg;
    msg << "position (" << p.x << ", " << p.y << ", " << p.z << ") outside the tiling box";
    throw OutOfBoundsError(msg.str());
  }
  const int ix = cell_along(p.x, bbox.min.x, bbox.max.x, grid.gx);
  const int iy = cell_along(p.y, bbox.min.y, bbox.max.y, grid.gy);
  const int iz = cell_along(p.z, bbox.min.z, bbox.max.z, grid.gz);
  return ix + grid.gx * (iy + grid.gy * iz);
}

TiledFrame tile_frame(const PointCloudFrame& frame, GridDims grid, const Box& global_bbox) {
  if (grid.gx < 1 || grid.gy < 1 || grid.gz < 1) {
    throw std::invalid_argument("tile grid dimensions must be >= 1");
  }
  TiledFrame tiled;
  tiled.frame_index = frame.frame_index;
  tiled.grid = grid;
  tiled.global_bbox = global_bbox;
  tiled.tiles.resize(static_cast<std::size_t>(grid.cell_count()));

  std::vector<std::size_t> outside;
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const Vec3 p = frame.points[i].position;
    if (!global_bbox.contains(p)) {
      outside.push_back(i);
      continue;
    }
    tiled.tiles[static_cast<std::size_t>(tile_of(p, grid, global_bbox))].push_back(i);
  }
  if (!outside.empty()) {
    std::ostringstream msg;
    msg << "frame " << frame.frame_index << ": " << outside.size()
        << " point(s) outside the global bbox, indices:";
    for (std::size_t k = 0; k < std::min<std::size_t>(outside.size(), 16); ++k) msg << ' ' << outside[k];
    if (outside.size() > 16) msg << " ...";
    throw OutOfBoundsError(msg.str());
  }
  return tiled;
}

std::vector<Point> gather_points(const PointCloudFrame& frame, std::span<const std::size_t> indices) {
  std::vector<Point> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(frame.points.at(i));
  return out;
}

}  // namespace voxport
