#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "voxport/errors.hpp"
#include "voxport/sampling.hpp"

using namespace voxport;

namespace {

std::vector<Point> blob(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> c(0, 255);
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.position = {g(rng), 0.6 * g(rng), 0.8 * g(rng)};
    p.color = {static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)),
               static_cast<std::uint8_t>(c(rng))};
  }
  return pts;
}

std::vector<Point> translated_shuffled(const std::vector<Point>& src, Vec3 shift, std::uint64_t seed) {
  auto out = src;
  for (auto& p : out) p.position = p.position + shift;
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

void check_valid(const SampledTile& s, std::size_t n, std::size_t size) {
  REQUIRE(s.point_indices.size() == n);
  std::set<std::size_t> seen(s.point_indices.begin(), s.point_indices.end());
  CHECK(seen.size() == n);
  CHECK(*seen.rbegin() < size);
}

// Brute-force IFMI straight from the definition.
double ifmi_oracle(const std::vector<Point>& t, const SampledTile& st, const std::vector<Point>& p,
                   const SampledTile& sp, double thr, double dmax, double cmax) {
  std::size_t mapped = 0;
  for (auto i : st.point_indices) {
    for (auto j : sp.point_indices) {
      const auto& a = t[i];
      const auto& b = p[j];
      const double dc = std::sqrt(std::pow(a.color.r - b.color.r, 2) + std::pow(a.color.g - b.color.g, 2) +
                                  std::pow(a.color.b - b.color.b, 2));
      if (std::sqrt(squared_distance(a.position, b.position)) / dmax + dc / cmax < thr) {
        ++mapped;
        break;
      }
    }
  }
  return double(mapped) / double(st.point_indices.size());
}

const SamplingMethod kAll[] = {SamplingMethod::URS, SamplingMethod::FPS, SamplingMethod::RS,
                               SamplingMethod::IDIS, SamplingMethod::GS, SamplingMethod::VS};

}  // namespace

TEST_SUITE("sampling") {
  TEST_CASE("method names") {
    for (auto m : kAll) CHECK(parse_sampling_method(to_string(m)) == m);
    CHECK(parse_sampling_method("fps") == SamplingMethod::FPS);
    CHECK_THROWS_AS(parse_sampling_method("poisson"), std::invalid_argument);
  }

  TEST_CASE("every sampler returns exactly N distinct indices, deterministically") {
    const auto pts = blob(3000, 1);
    for (auto m : kAll) {
      for (std::size_t n : {64u, 512u, 1024u}) {
        CAPTURE(to_string(m));
        CAPTURE(n);
        const auto a = sample(pts, n, m, 64, 77);
        const auto b = sample(pts, n, m, 64, 77);
        check_valid(a, n, pts.size());
        CHECK(a.point_indices == b.point_indices);
      }
    }
  }

  TEST_CASE("exhaustion returns the whole tile") {
    const auto pts = blob(256, 4);
    for (auto m : kAll) {
      const std::size_t cubes = m == SamplingMethod::URS ? 256 : 64;
      auto s = sample(pts, 256, m, cubes, 3);
      std::sort(s.point_indices.begin(), s.point_indices.end());
      for (std::size_t i = 0; i < 256; ++i) CHECK(s.point_indices[i] == i);
    }
  }

  TEST_CASE("precondition errors") {
    const auto pts = blob(100, 4);
    CHECK_THROWS_AS(urs_sample(pts, 128, 64, 0), InsufficientPointsError);
    CHECK_THROWS_AS(urs_sample(pts, 96, 64, 0), std::invalid_argument);
    CHECK_THROWS_AS(baseline_sample(pts, 101, SamplingMethod::RS, 0), InsufficientPointsError);
  }

  TEST_CASE("URS centers are one per occupied cube and inside the sample") {
    const auto pts = blob(4000, 8);
    const auto s = urs_sample(pts, 1024, 64, 5);
    CHECK(!s.centers.empty());
    CHECK(s.centers.size() <= 64);
    const std::set<std::size_t> chosen(s.point_indices.begin(), s.point_indices.end());
    for (auto c : s.centers) CHECK(chosen.count(c) == 1);
  }

  TEST_CASE("FPS picks opposite corners of a square") {
    std::vector<Point> sq{{{0, 0, 0}, {}}, {{1, 0, 0}, {}}, {{1, 1, 0}, {}}, {{0, 1, 0}, {}}};
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      auto s = baseline_sample(sq, 2, SamplingMethod::FPS, seed);
      std::sort(s.point_indices.begin(), s.point_indices.end());
      const bool diag = s.point_indices == std::vector<std::size_t>{0, 2} || s.point_indices == std::vector<std::size_t>{1, 3};
      CHECK(diag);
    }
  }

  TEST_CASE("IDIS keeps the isolated points") {
    std::vector<Point> pts;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 0.01);
    for (int i = 0; i < 200; ++i) pts.push_back({{g(rng), g(rng), g(rng)}, {}});
    pts.push_back({{10, 0, 0}, {}});
    pts.push_back({{0, 10, 0}, {}});
    pts.push_back({{0, 0, -10}, {}});
    // Oracle: the three largest 16th-neighbor radii by brute force.
    std::vector<std::pair<double, std::size_t>> radius;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::vector<double> d;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j != i) d.push_back(squared_distance(pts[i].position, pts[j].position));
      }
      std::nth_element(d.begin(), d.begin() + 15, d.end());
      radius.push_back({d[15], i});
    }
    std::sort(radius.rbegin(), radius.rend());
    std::set<std::size_t> want{radius[0].second, radius[1].second, radius[2].second};
    CHECK(want == std::set<std::size_t>{200, 201, 202});
    auto s = baseline_sample(pts, 3, SamplingMethod::IDIS, 0);
    CHECK(std::set<std::size_t>(s.point_indices.begin(), s.point_indices.end()) == want);
  }

  TEST_CASE("DaCVV examples") {
    std::vector<Point> tile{{{0, 0, 0}, {0, 0, 0}}, {{2, 0, 0}, {255, 255, 255}}};
    const auto ctx = DacvvContext::from_tile(tile);
    CHECK(ctx.d_max == doctest::Approx(2.0));
    CHECK(dacvv(tile[0], tile[0], ctx) == 0.0);
    CHECK(dacvv(tile[0], tile[1], ctx) == doctest::Approx(2.0).epsilon(1e-12));
    const Point mid{{1, 0, 0}, {0, 0, 0}};
    CHECK(dacvv(tile[0], mid, ctx) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dacvv(tile[1], mid, ctx) == dacvv(mid, tile[1], ctx));
    std::vector<Point> flat{{{0, 0, 0}, {1, 1, 1}}, {{0, 0, 0}, {1, 1, 1}}};
    CHECK_THROWS_AS(DacvvContext::from_tile(flat), std::invalid_argument);
  }

  TEST_CASE("exact diameter") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Vec3> p(300);
      for (auto& v : p) v = {u(rng), u(rng), 0.3 * u(rng)};
      double best = 0;
      for (auto& a : p) {
        for (auto& b : p) best = std::max(best, std::sqrt(squared_distance(a, b)));
      }
      CHECK(diameter(p) == best);
    }
  }

  TEST_CASE("IFMI basic properties") {
    const auto t = blob(2000, 20);
    const auto prev = translated_shuffled(t, {0.3, 0, 0}, 21);
    const auto ctx = DacvvContext::from_tile(t);
    const auto a = urs_sample(t, 256, 64, 9);
    CHECK(ifmi(t, a, t, a, 0.01, ctx) == 1.0);
    for (auto m : kAll) {
      const auto st = sample(t, 256, m, 64, 9);
      const auto sp = sample(prev, 256, m, 64, 9);
      CHECK(ifmi(t, st, prev, sp, 2.0 + 1e-9, ctx) == 1.0);
      std::vector<double> thr;
      for (int i = 0; i <= 40; ++i) thr.push_back(i * 0.05);
      const auto curve = ifmi_curve(t, st, prev, sp, thr, ctx);
      for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
      for (double th : {0.1, 0.3}) {
        CHECK(ifmi(t, st, prev, sp, th, ctx) == ifmi_oracle(t, st, prev, sp, th, ctx.d_max, ctx.c_max));
      }
    }
    auto other = a;
    other.tile_id = 3;
    CHECK_THROWS_AS(ifmi(t, a, t, other, 0.1, ctx), std::invalid_argument);
    CHECK_THROWS_AS(ifmi(t, a, t, a, -0.1, ctx), std::invalid_argument);
  }

  TEST_CASE("URS keeps more inter-frame correspondence than RS on a translated blob") {
    const auto t = blob(8000, 30);
    const auto prev = translated_shuffled(t, {0.05, 0.02, 0}, 31);
    const auto ctx = DacvvContext::from_tile(t);
    const auto ut = urs_sample(t, 1024, 64, 1), up = urs_sample(prev, 1024, 64, 1);
    const auto rt = baseline_sample(t, 1024, SamplingMethod::RS, 1);
    const auto rp = baseline_sample(prev, 1024, SamplingMethod::RS, 1);
    CHECK(ifmi(t, ut, prev, up, 0.3, ctx) > ifmi(t, rt, prev, rp, 0.3, ctx));
    for (double th : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      CHECK(ifmi(t, ut, prev, up, th, ctx) >= ifmi(t, rt, prev, rp, th, ctx));
    }
  }

  TEST_CASE("frame tile sampling maps back to frame indices") {
    PointCloudFrame f;
    f.points = blob(3000, 2);
    const auto tiled = tile_frame(f, {2, 1, 1}, bounding_box(f.points));
    const auto s = sample_frame_tile(f, tiled, 1, 128, SamplingMethod::URS, 64, 4);
    CHECK(s.tile_id == 1);
    for (auto i : s.point_indices) {
      CHECK(std::count(tiled.tiles[1].begin(), tiled.tiles[1].end(), i) == 1);
    }
  }
}
