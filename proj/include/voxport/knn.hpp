#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "voxport/core.hpp"

namespace voxport {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Exact k-nearest-neighbor search over a fixed point set.
///
/// Points are bucketed into a uniform grid whose cell edge is the bounding-box
/// diagonal divided by cbrt(n). Queries expand rings of cells around the query
/// cell and stop only once no unvisited cell can hold a closer (or equally
/// close, lower-index) point, so results match a brute-force scan exactly:
/// ascending distance, ties broken by ascending index. Sets below 64 points are
/// scanned directly.
///
/// The index keeps a view of the positions; the backing storage must outlive it.
/// Queries are const and may run concurrently.
class KnnIndex {
 public:
  static constexpr std::size_t kBruteForceBelow = 64;

  explicit KnnIndex(std::span<const Point> points);
  explicit KnnIndex(std::span<const Vec3> positions);

  std::size_t size() const { return size_; }
  Vec3 position(std::size_t i) const { return points_ ? points_[i].position : positions_[i]; }

  /// The k nearest indexed points to `query`. Throws std::invalid_argument when
  /// k is zero or exceeds size().
  std::vector<std::size_t> knn(Vec3 query, std::size_t k) const;
  std::vector<Neighbor> knn_with_distances(Vec3 query, std::size_t k) const;

 private:
  void build();
  void check_k(std::size_t k) const;
  std::vector<Neighbor> brute_force(Vec3 query, std::size_t k) const;

  const Point* points_ = nullptr;
  const Vec3* positions_ = nullptr;
  std::size_t size_ = 0;

  bool use_grid_ = false;
  Vec3 origin_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::uint32_t> cell_start_;  // size cells+1
  std::vector<std::uint32_t> sorted_;      // point indices grouped by cell
};

/// Free-function form of KnnIndex::knn.
inline std::vector<std::size_t> knn(const KnnIndex& index, Vec3 query, std::size_t k) {
  return index.knn(query, k);
}

}  // namespace voxport
