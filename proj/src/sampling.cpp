#include "voxport/sampling.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "voxport/errors.hpp"
#include "voxport/knn.hpp"
#include "voxport/random.hpp"

namespace voxport {

std::string_view to_string(SamplingMethod m) {
  switch (m) {
    case SamplingMethod::URS: return "URS";
    case SamplingMethod::FPS: return "FPS";
    case SamplingMethod::RS: return "RS";
    case SamplingMethod::IDIS: return "IDIS";
    case SamplingMethod::GS: return "GS";
    case SamplingMethod::VS: return "VS";
  }
  return "?";
}

SamplingMethod parse_sampling_method(std::string_view name) {
  std::string up(name);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto m : {SamplingMethod::URS, SamplingMethod::FPS, SamplingMethod::RS, SamplingMethod::IDIS,
                 SamplingMethod::GS, SamplingMethod::VS}) {
    if (up == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown sampling method '" + std::string(name) + "'");
}

namespace {

void require_points(std::span<const Point> tile, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample size must be >= 1");
  if (tile.size() < n) {
    throw InsufficientPointsError("tile has " + std::to_string(tile.size()) + " points, " + std::to_string(n) +
                                  " requested");
  }
}

// Factorization cx*cy*cz == cubes whose per-axis counts best follow the extents.
std::array<int, 3> cube_layout(std::size_t cubes, Vec3 extent) {
  double emax = std::max({extent.x, extent.y, extent.z});
  if (!(emax > 0.0)) emax = 1.0;
  std::array<double, 3> e{};
  for (std::size_t a = 0; a < 3; ++a) e[a] = std::max(extent[a], emax * 1e-9);
  const double geo = std::cbrt(e[0] * e[1] * e[2]);
  const double per_axis = std::cbrt(static_cast<double>(cubes));

  std::array<int, 3> best{static_cast<int>(cubes), 1, 1};
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t cx = 1; cx <= cubes; ++cx) {
    if (cubes % cx) continue;
    const std::size_t rest = cubes / cx;
    for (std::size_t cy = 1; cy <= rest; ++cy) {
      if (rest % cy) continue;
      const std::size_t cz = rest / cy;
      const std::array<std::size_t, 3> c{cx, cy, cz};
      double cost = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        const double ideal = per_axis * e[a] / geo;
        const double d = std::log(static_cast<double>(c[a]) / ideal);
        cost += d * d;
      }
      if (cost < best_cost - 1e-12) {
        best_cost = cost;
        best = {static_cast<int>(cx), static_cast<int>(cy), static_cast<int>(cz)};
      }
    }
  }
  return best;
}

// Nearest points to `center` that are not yet taken, appended to `out`.
void take_nearest(const KnnIndex& index, Vec3 center, std::size_t quota, std::vector<bool>& taken,
                  std::vector<std::size_t>& out) {
  std::size_t k = std::min(index.size(), std::max<std::size_t>(quota * 2, 8));
  while (true) {
    const auto nn = index.knn(center, k);
    std::size_t got = 0;
    for (auto i : nn) {
      if (!taken[i]) ++got;
      if (got == quota) break;
    }
    if (got == quota || k == index.size()) {
      std::size_t added = 0;
      for (auto i : nn) {
        if (added == quota) break;
        if (!taken[i]) {
          taken[i] = true;
          out.push_back(i);
          ++added;
        }
      }
      return;
    }
    k = std::min(index.size(), k * 2);
  }
}

std::vector<std::size_t> random_subset(std::size_t total, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

std::vector<std::size_t> farthest_point(std::span<const Point> tile, std::size_t n, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(n);
  std::vector<double> dist(tile.size(), std::numeric_limits<double>::infinity());
  std::size_t current = std::uniform_int_distribution<std::size_t>(0, tile.size() - 1)(rng);
  for (std::size_t s = 0; s < n; ++s) {
    out.push_back(current);
    dist[current] = -1.0;
    const Vec3 c = tile[current].position;
    std::size_t next = 0;
    double far = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tile.size(); ++i) {
      if (dist[i] < 0.0) continue;
      dist[i] = std::min(dist[i], squared_distance(c, tile[i].position));
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
    current = next;
  }
  return out;
}

// Indices of the n largest scores, ties to the lower index.
std::vector<std::size_t> top_by_score(const std::vector<double>& score, std::size_t n) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
  idx.resize(n);
  return idx;
}

std::vector<std::size_t> inverse_density(std::span<const Point> tile, std::size_t n) {
  const KnnIndex index(tile);
  const std::size_t k = std::min(kDensityNeighbors + 1, tile.size());
  // Larger k-th neighbor radius means lower density k / r^3.
  std::vector<double> radius(tile.size(), 0.0);
  for (std::size_t i = 0; i < tile.size(); ++i) {
    const auto nn = index.knn_with_distances(tile[i].position, k);
    radius[i] = nn.back().squared_distance;
  }
  return top_by_score(radius, n);
}

std::vector<std::size_t> geometric_curvature(std::span<const Point> tile, std::size_t n) {
  const KnnIndex index(tile);
  const std::size_t k = std::min(kNormalNeighbors, tile.size());
  std::vector<std::vector<std::size_t>> hoods(tile.size());
  std::vector<Eigen::Vector3d> normals(tile.size());
  for (std::size_t i = 0; i < tile.size(); ++i) {
    hoods[i] = index.knn(tile[i].position, k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (auto j : hoods[i]) mean += Eigen::Vector3d(tile[j].position.x, tile[j].position.y, tile[j].position.z);
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto j : hoods[i]) {
      const Eigen::Vector3d d = Eigen::Vector3d(tile[j].position.x, tile[j].position.y, tile[j].position.z) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    normals[i] = eig.eigenvectors().col(0);
  }
  std::vector<double> curvature(tile.size(), 0.0);
  for (std::size_t i = 0; i < tile.size(); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (auto j : hoods[i]) mean += normals[j].dot(normals[i]) >= 0.0 ? normals[j] : Eigen::Vector3d(-normals[j]);
    const double len = mean.norm();
    curvature[i] = len > 0.0 ? 1.0 - std::abs(normals[i].dot(mean) / len) : 1.0;
  }
  return top_by_score(curvature, n);
}

std::vector<std::size_t> voxel_centroids(std::span<const Point> tile, std::size_t n, Rng& rng) {
  const Box box = bounding_box(tile);
  const Vec3 ext = box.extent();
  const double emax = std::max({ext.x, ext.y, ext.z, 1e-12});
  double volume = 1.0;
  for (std::size_t a = 0; a < 3; ++a) volume *= std::max(ext[a], emax * 1e-3);
  double edge = std::cbrt(volume / static_cast<double>(n));

  struct Voxel {
    std::uint64_t key;
    Vec3 sum;
    std::size_t count;
  };
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(tile.size());
  std::vector<Voxel> voxels;
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (std::size_t i = 0; i < tile.size(); ++i) {
      std::uint64_t key = 0;
      for (std::size_t a = 0; a < 3; ++a) {
        const auto c = static_cast<std::uint64_t>(std::floor((tile[i].position[a] - box.min[a]) / edge));
        key = key * 2097152ULL + std::min<std::uint64_t>(c, 2097151ULL);
      }
      keyed[i] = {key, i};
    }
    std::sort(keyed.begin(), keyed.end());
    voxels.clear();
    for (const auto& [key, i] : keyed) {
      if (voxels.empty() || voxels.back().key != key) voxels.push_back({key, {}, 0});
      voxels.back().sum = voxels.back().sum + tile[i].position;
      ++voxels.back().count;
    }
    if (voxels.size() >= n) break;
    edge *= 0.8;
  }

  std::vector<std::size_t> order(voxels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (voxels.size() > n) order = random_subset(voxels.size(), n, rng);

  const KnnIndex index(tile);
  std::vector<bool> taken(tile.size(), false);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (auto v : order) {
    const Vec3 centroid = (1.0 / static_cast<double>(voxels[v].count)) * voxels[v].sum;
    take_nearest(index, centroid, 1, taken, out);
  }
  // Too few occupied voxels (duplicate positions): fill with random leftovers.
  if (out.size() < n) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < tile.size(); ++i) {
      if (!taken[i]) rest.push_back(i);
    }
    for (auto r : random_subset(rest.size(), n - out.size(), rng)) out.push_back(rest[r]);
  }
  return out;
}

}  // namespace

SampledTile urs_sample(std::span<const Point> tile, std::size_t n, std::size_t cubes, std::uint64_t seed) {
  if (cubes == 0) throw std::invalid_argument("cube count must be >= 1");
  if (n == 0 || n % cubes != 0) {
    throw std::invalid_argument("sample size " + std::to_string(n) + " is not a multiple of the cube count " +
                                std::to_string(cubes));
  }
  require_points(tile, n);

  const Box box = bounding_box(tile);
  const Vec3 ext = box.extent();
  const auto layout = cube_layout(cubes, ext);
  const Vec3 edge{ext.x / layout[0], ext.y / layout[1], ext.z / layout[2]};

  auto cube_of = [&](Vec3 p) {
    std::size_t c = 0;
    for (int a = 2; a >= 0; --a) {
      const auto ua = static_cast<std::size_t>(a);
      int i = edge[ua] > 0.0 ? static_cast<int>(std::floor((p[ua] - box.min[ua]) / edge[ua])) : 0;
      i = std::clamp(i, 0, layout[ua] - 1);
      c = c * static_cast<std::size_t>(layout[ua]) + static_cast<std::size_t>(i);
    }
    return c;
  };

  // Points grouped by cube (counting sort).
  std::vector<std::uint32_t> start(cubes + 1, 0);
  for (const auto& p : tile) ++start[cube_of(p.position) + 1];
  for (std::size_t c = 0; c < cubes; ++c) start[c + 1] += start[c];
  std::vector<std::uint32_t> members(tile.size());
  {
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < tile.size(); ++i) members[fill[cube_of(tile[i].position)]++] = static_cast<std::uint32_t>(i);
  }

  auto cube_coords = [&](std::size_t c) {
    std::array<std::size_t, 3> ijk{};
    ijk[0] = c % static_cast<std::size_t>(layout[0]);
    ijk[1] = (c / static_cast<std::size_t>(layout[0])) % static_cast<std::size_t>(layout[1]);
    ijk[2] = c / (static_cast<std::size_t>(layout[0]) * static_cast<std::size_t>(layout[1]));
    return ijk;
  };

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampledTile out;
  out.centers.reserve(cubes);
  std::vector<std::size_t> center_of_cube(cubes, SIZE_MAX);
  for (std::size_t c = 0; c < cubes; ++c) {
    const auto ijk = cube_coords(c);
    Vec3 target;
    for (std::size_t a = 0; a < 3; ++a) target[a] = box.min[a] + (static_cast<double>(ijk[a]) + unit(rng)) * edge[a];
    if (start[c] == start[c + 1]) continue;
    std::size_t best = members[start[c]];
    double best_d = squared_distance(target, tile[best].position);
    for (auto s = start[c] + 1; s < start[c + 1]; ++s) {
      const std::size_t i = members[s];
      const double d = squared_distance(target, tile[i].position);
      if (d < best_d || (d == best_d && i < best)) {
        best = i;
        best_d = d;
      }
    }
    center_of_cube[c] = best;
  }
  members = {};

  // Quotas: empty cubes donate to the nearest non-empty cube.
  const std::size_t per_cube = n / cubes;
  std::vector<std::size_t> quota(cubes, 0);
  for (std::size_t c = 0; c < cubes; ++c) {
    if (center_of_cube[c] != SIZE_MAX) {
      quota[c] += per_cube;
      continue;
    }
    const auto from = cube_coords(c);
    std::size_t target = SIZE_MAX;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < cubes; ++o) {
      if (center_of_cube[o] == SIZE_MAX) continue;
      const auto to = cube_coords(o);
      double d = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        const double delta = (static_cast<double>(to[a]) - static_cast<double>(from[a])) * edge[a];
        d += delta * delta;
      }
      if (d < best) {
        best = d;
        target = o;
      }
    }
    quota[target] += per_cube;
  }

  const KnnIndex index(tile);
  std::vector<bool> taken(tile.size(), false);
  out.point_indices.reserve(n);
  for (std::size_t c = 0; c < cubes; ++c) {
    if (center_of_cube[c] == SIZE_MAX) continue;
    out.centers.push_back(center_of_cube[c]);
    take_nearest(index, tile[center_of_cube[c]].position, quota[c], taken, out.point_indices);
  }
  return out;
}

SampledTile baseline_sample(std::span<const Point> tile, std::size_t n, SamplingMethod method, std::uint64_t seed) {
  require_points(tile, n);
  Rng rng(seed);
  SampledTile out;
  switch (method) {
    case SamplingMethod::RS: out.point_indices = random_subset(tile.size(), n, rng); break;
    case SamplingMethod::FPS: out.point_indices = farthest_point(tile, n, rng); break;
    case SamplingMethod::IDIS: out.point_indices = inverse_density(tile, n); break;
    case SamplingMethod::GS: out.point_indices = geometric_curvature(tile, n); break;
    case SamplingMethod::VS: out.point_indices = voxel_centroids(tile, n, rng); break;
    case SamplingMethod::URS: throw std::invalid_argument("baseline_sample: use urs_sample for URS");
  }
  return out;
}

SampledTile sample(std::span<const Point> tile, std::size_t n, SamplingMethod method, std::size_t cubes,
                   std::uint64_t seed) {
  return method == SamplingMethod::URS ? urs_sample(tile, n, cubes, seed) : baseline_sample(tile, n, method, seed);
}

SampledTile sample_frame_tile(const PointCloudFrame& frame, const TiledFrame& tiled, int tile_id, std::size_t n,
                              SamplingMethod method, std::size_t cubes, std::uint64_t seed) {
  const auto& ids = tiled.tiles.at(static_cast<std::size_t>(tile_id));
  const auto pts = gather_points(frame, ids);
  SampledTile s = sample(pts, n, method, cubes, seed);
  for (auto& i : s.point_indices) i = ids[i];
  for (auto& i : s.centers) i = ids[i];
  s.tile_id = tile_id;
  s.frame_index = frame.frame_index;
  return s;
}

double diameter(std::span<const Vec3> points) {
  if (points.size() < 2) return 0.0;
  Vec3 centroid;
  for (const auto& p : points) centroid = centroid + p;
  centroid = (1.0 / static_cast<double>(points.size())) * centroid;
  std::vector<std::pair<double, std::size_t>> radius(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) radius[i] = {norm(points[i] - centroid), i};
  std::sort(radius.begin(), radius.end(), std::greater<>());

  // |p_i - p_j| <= r_i + r_j, so once r_i + r_max cannot beat the best pair
  // no later i can either.
  double best2 = 0.0;
  const double r_max = radius.front().first;
  for (std::size_t a = 0; a < radius.size(); ++a) {
    const double bound = radius[a].first + r_max;
    if (bound * bound <= best2) break;
    const Vec3 p = points[radius[a].second];
    for (std::size_t b = a + 1; b < radius.size(); ++b) {
      const double pair_bound = radius[a].first + radius[b].first;
      if (pair_bound * pair_bound <= best2) break;
      best2 = std::max(best2, squared_distance(p, points[radius[b].second]));
    }
  }
  return std::sqrt(best2);
}

namespace {

Vec3 color_vec(Color c) { return {double(c.r), double(c.g), double(c.b)}; }

}  // namespace

DacvvContext DacvvContext::from_tile(std::span<const Point> tile) {
  std::vector<Vec3> pos(tile.size()), col(tile.size());
  for (std::size_t i = 0; i < tile.size(); ++i) {
    pos[i] = tile[i].position;
    col[i] = color_vec(tile[i].color);
  }
  DacvvContext ctx{diameter(pos), diameter(col)};
  if (!(ctx.d_max > 0.0) || !(ctx.c_max > 0.0)) {
    throw std::invalid_argument("degenerate reference tile: zero coordinate or color spread");
  }
  return ctx;
}

double dacvv(const Point& a, const Point& b, const DacvvContext& ctx) {
  return norm(a.position - b.position) / ctx.d_max + norm(color_vec(a.color) - color_vec(b.color)) / ctx.c_max;
}

std::vector<double> min_dacvv(std::span<const Point> tile_t, const SampledTile& sampled_t,
                              std::span<const Point> tile_prev, const SampledTile& sampled_prev,
                              const DacvvContext& ctx) {
  if (sampled_t.tile_id != sampled_prev.tile_id) {
    throw std::invalid_argument("IFMI compares mapped tiles; tile ids " + std::to_string(sampled_t.tile_id) +
                                " and " + std::to_string(sampled_prev.tile_id) + " differ");
  }
  std::vector<double> out(sampled_t.point_indices.size(), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < out.size(); ++a) {
    const Point& pa = tile_t[sampled_t.point_indices[a]];
    for (auto b : sampled_prev.point_indices) out[a] = std::min(out[a], dacvv(pa, tile_prev[b], ctx));
  }
  return out;
}

std::vector<double> ifmi_curve(std::span<const Point> tile_t, const SampledTile& sampled_t,
                               std::span<const Point> tile_prev, const SampledTile& sampled_prev,
                               std::span<const double> thresholds, const DacvvContext& ctx) {
  for (double th : thresholds) {
    if (th < 0.0) throw std::invalid_argument("IFMI threshold must be >= 0");
  }
  const auto best = min_dacvv(tile_t, sampled_t, tile_prev, sampled_prev, ctx);
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double th : thresholds) {
    const auto mapped = std::count_if(best.begin(), best.end(), [&](double d) { return d < th; });
    out.push_back(best.empty() ? 0.0 : static_cast<double>(mapped) / static_cast<double>(best.size()));
  }
  return out;
}

double ifmi(std::span<const Point> tile_t, const SampledTile& sampled_t, std::span<const Point> tile_prev,
            const SampledTile& sampled_prev, double threshold, const DacvvContext& ctx) {
  const double th[1] = {threshold};
  return ifmi_curve(tile_t, sampled_t, tile_prev, sampled_prev, th, ctx).front();
}

}  // namespace voxport
