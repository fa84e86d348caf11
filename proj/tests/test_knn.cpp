#include <doctest.h>

#include <algorithm>
#include <random>

#include "voxport/knn.hpp"

using namespace voxport;

namespace {

std::vector<Neighbor> brute_force(const std::vector<Vec3>& pts, Vec3 q, std::size_t k) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({i, squared_distance(pts[i], q)});
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.squared_distance != b.squared_distance ? a.squared_distance < b.squared_distance : a.index < b.index;
  });
  all.resize(k);
  return all;
}

}  // namespace

TEST_SUITE("knn") {
  TEST_CASE("query on an indexed point") {
    std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 5, 0}};
    KnnIndex index{std::span<const Vec3>(pts)};
    CHECK(knn(index, {1, 0, 0}, 1) == std::vector<std::size_t>{1});
  }

  TEST_CASE("collinear ordering and k bounds") {
    std::vector<Vec3> pts{{3, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    KnnIndex index{std::span<const Vec3>(pts)};
    CHECK(index.knn({0, 0, 0}, 2) == std::vector<std::size_t>{1, 2});
    CHECK_THROWS_AS(index.knn({0, 0, 0}, 4), std::invalid_argument);
    CHECK_THROWS_AS(index.knn({0, 0, 0}, 0), std::invalid_argument);
  }

  TEST_CASE("ties resolve to the lower index") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 200; ++i) pts.push_back({double(i % 5), double((i / 5) % 8), double(i / 40)});
    pts.push_back({0, 0, 0});  // duplicate of index 0
    KnnIndex index{std::span<const Vec3>(pts)};
    for (std::size_t k : {1u, 2u, 7u, 30u}) {
      const auto got = index.knn_with_distances({0, 0, 0}, k);
      const auto want = brute_force(pts, {0, 0, 0}, k);
      for (std::size_t i = 0; i < k; ++i) CHECK(got[i].index == want[i].index);
    }
  }

  TEST_CASE("grid search equals brute force on random sets") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
      std::uniform_int_distribution<std::size_t> size_dist(1, 1000);
      const std::size_t n = size_dist(rng);
      std::uniform_real_distribution<double> u(-3.0, 3.0);
      std::vector<Vec3> pts(n);
      // Mix of uniform, clustered and flat layouts.
      for (auto& p : pts) {
        p = {u(rng), u(rng), u(rng)};
        if (trial % 3 == 1) p = 0.05 * p;
        if (trial % 3 == 2) p.z = 0.0;
      }
      KnnIndex index{std::span<const Vec3>(pts)};
      for (int q = 0; q < 10; ++q) {
        const Vec3 query{u(rng), u(rng), u(rng)};
        const std::size_t k = std::min<std::size_t>(n, 1 + rng() % 32);
        const auto got = index.knn_with_distances(query, k);
        const auto want = brute_force(pts, query, k);
        REQUIRE(got.size() == k);
        for (std::size_t i = 0; i < k; ++i) {
          CHECK(got[i].index == want[i].index);
          CHECK(got[i].squared_distance == want[i].squared_distance);
        }
      }
    }
  }
}
