#include "voxport/knn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace voxport {
namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

// Bounded max-heap on (distance, index) keeping the k best candidates.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(std::size_t index, double d2) {
    const Neighbor n{index, d2};
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), closer);
    } else if (closer(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), closer);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), closer);
    }
  }
  bool full() const { return heap_.size() == k_; }
  double worst() const { return heap_.front().squared_distance; }

  std::vector<Neighbor> sorted() && {
    std::sort_heap(heap_.begin(), heap_.end(), closer);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

}  // namespace

KnnIndex::KnnIndex(std::span<const Point> points) : points_(points.data()), size_(points.size()) { build(); }

KnnIndex::KnnIndex(std::span<const Vec3> positions) : positions_(positions.data()), size_(positions.size()) {
  build();
}

void KnnIndex::build() {
  use_grid_ = size_ >= kBruteForceBelow;
  if (!use_grid_) return;

  Vec3 lo = position(0), hi = position(0);
  for (std::size_t i = 1; i < size_; ++i) {
    const Vec3 p = position(i);
    for (std::size_t a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double diag = norm(hi - lo);
  if (!(diag > 0.0) || !std::isfinite(diag)) {
    use_grid_ = false;  // all points coincide
    return;
  }
  cell_ = diag / std::cbrt(static_cast<double>(size_));
  origin_ = lo;
  std::size_t cells = 1;
  for (std::size_t a = 0; a < 3; ++a) {
    dims_[a] = std::max(1, static_cast<int>(std::floor((hi[a] - lo[a]) / cell_)) + 1);
    cells *= static_cast<std::size_t>(dims_[a]);
  }

  auto cell_index = [&](Vec3 p) {
    std::size_t c = 0;
    for (int a = 2; a >= 0; --a) {
      int i = static_cast<int>(std::floor((p[static_cast<std::size_t>(a)] - origin_[static_cast<std::size_t>(a)]) / cell_));
      i = std::clamp(i, 0, dims_[a] - 1);
      c = c * static_cast<std::size_t>(dims_[a]) + static_cast<std::size_t>(i);
    }
    return c;
  };

  cell_start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < size_; ++i) ++cell_start_[cell_index(position(i)) + 1];
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  sorted_.resize(size_);
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < size_; ++i) sorted_[fill[cell_index(position(i))]++] = static_cast<std::uint32_t>(i);
}

void KnnIndex::check_k(std::size_t k) const {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  if (k > size_) {
    throw std::invalid_argument("knn: k = " + std::to_string(k) + " exceeds the " + std::to_string(size_) +
                                " indexed points");
  }
}

std::vector<Neighbor> KnnIndex::brute_force(Vec3 query, std::size_t k) const {
  TopK top(k);
  for (std::size_t i = 0; i < size_; ++i) top.offer(i, squared_distance(query, position(i)));
  return std::move(top).sorted();
}

std::vector<std::size_t> KnnIndex::knn(Vec3 query, std::size_t k) const {
  const auto found = knn_with_distances(query, k);
  std::vector<std::size_t> out(found.size());
  std::transform(found.begin(), found.end(), out.begin(), [](const Neighbor& n) { return n.index; });
  return out;
}

std::vector<Neighbor> KnnIndex::knn_with_distances(Vec3 query, std::size_t k) const {
  check_k(k);
  if (!use_grid_) return brute_force(query, k);

  long q[3];
  for (std::size_t a = 0; a < 3; ++a) {
    q[a] = static_cast<long>(std::floor((query[a] - origin_[a]) / cell_));
  }
  // Ring r covers cells at Chebyshev distance r from the query cell. Any point
  // in ring r+1 or beyond is at least r * cell_ away from the query.
  long max_ring = 0;
  for (int a = 0; a < 3; ++a) {
    max_ring = std::max({max_ring, std::abs(q[a]), std::abs(q[a] - (dims_[a] - 1))});
  }

  TopK top(k);
  auto visit_cell = [&](long cx, long cy, long cz) {
    if (cx < 0 || cy < 0 || cz < 0 || cx >= dims_[0] || cy >= dims_[1] || cz >= dims_[2]) return;
    const auto c = static_cast<std::size_t>(cx + dims_[0] * (cy + static_cast<long>(dims_[1]) * cz));
    for (auto s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
      const std::size_t i = sorted_[s];
      top.offer(i, squared_distance(query, position(i)));
    }
  };

  // Rings that do not touch the grid are empty.
  long first_ring = 0;
  for (int a = 0; a < 3; ++a) {
    first_ring = std::max({first_ring, -q[a], q[a] - (dims_[a] - 1)});
  }
  const long lo[3] = {-q[0], -q[1], -q[2]};
  const long hi[3] = {dims_[0] - 1 - q[0], dims_[1] - 1 - q[1], dims_[2] - 1 - q[2]};

  for (long r = first_ring; r <= max_ring; ++r) {
    for (long dz = std::max(-r, lo[2]); dz <= std::min(r, hi[2]); ++dz) {
      for (long dy = std::max(-r, lo[1]); dy <= std::min(r, hi[1]); ++dy) {
        if (std::abs(dz) == r || std::abs(dy) == r) {
          for (long dx = std::max(-r, lo[0]); dx <= std::min(r, hi[0]); ++dx) {
            visit_cell(q[0] + dx, q[1] + dy, q[2] + dz);
          }
        } else {
          if (-r >= lo[0]) visit_cell(q[0] - r, q[1] + dy, q[2] + dz);
          if (r > 0 && r <= hi[0]) visit_cell(q[0] + r, q[1] + dy, q[2] + dz);
        }
      }
    }
    if (top.full()) {
      const double bound = static_cast<double>(r) * cell_;
      if (top.worst() < bound * bound) break;
    }
  }
  return std::move(top).sorted();
}

}  // namespace voxport
