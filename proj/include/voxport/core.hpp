#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace voxport {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(Vec3 a);
inline double squared_distance(Vec3 a, Vec3 b) {
  const Vec3 d = a - b;
  return dot(d, d);
}

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Color&, const Color&) = default;
};

struct Point {
  Vec3 position;
  Color color;
  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloudFrame {
  std::size_t frame_index = 0;
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  friend bool operator==(const PointCloudFrame&, const PointCloudFrame&) = default;
};

struct Box {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  double diagonal() const { return norm(extent()); }
  bool contains(Vec3 p) const;
  friend bool operator==(const Box&, const Box&) = default;
};

Box bounding_box(std::span<const Point> points);
Box bounding_box(std::span<const PointCloudFrame> frames);

struct GridDims {
  int gx = 2, gy = 3, gz = 2;

  int cell_count() const { return gx * gy * gz; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

struct TiledFrame {
  std::size_t frame_index = 0;
  GridDims grid;
  Box global_bbox;
  // tiles[j] lists indices into the frame's points; j = ix + gx * (iy + gy * iz).
  std::vector<std::vector<std::size_t>> tiles;
};

/// Luminance-weighted grayscale, 0.299 r + 0.587 g + 0.114 b.
double rgb_to_gray(Color c);

/// Cell id of a position under a grid over `bbox`. Cells are half-open except
/// along the max faces, which belong to the last cell. Throws OutOfBoundsError
/// when the position lies outside the box.
int tile_of(Vec3 p, GridDims grid, const Box& bbox);

/// Partitions a frame into grid cells of a sequence-wide box so that tile j of
/// consecutive frames covers the same region of space.
TiledFrame tile_frame(const PointCloudFrame& frame, GridDims grid, const Box& global_bbox);

/// Copies the points of one tile into a contiguous buffer.
std::vector<Point> gather_points(const PointCloudFrame& frame, std::span<const std::size_t> indices);

}  // namespace voxport
