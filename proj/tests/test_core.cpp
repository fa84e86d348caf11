#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "voxport/core.hpp"
#include "voxport/errors.hpp"
#include "voxport/kvfile.hpp"
#include "voxport/manifest.hpp"
#include "voxport/ply.hpp"

using namespace voxport;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("voxport_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PointCloudFrame random_frame(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  std::uniform_int_distribution<int> c(0, 255);
  PointCloudFrame f;
  f.frame_index = 3;
  for (std::size_t i = 0; i < n; ++i) {
    f.points.push_back({{u(rng), u(rng), u(rng)},
                        {static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)),
                         static_cast<std::uint8_t>(c(rng))}});
  }
  return f;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("grayscale conversion") {
    CHECK(rgb_to_gray({255, 255, 255}) == doctest::Approx(255.0).epsilon(1e-12));
    CHECK(rgb_to_gray({0, 0, 0}) == 0.0);
    CHECK(rgb_to_gray({255, 0, 0}) == doctest::Approx(76.245).epsilon(1e-12));
    for (int v = 0; v < 255; ++v) {
      const auto a = static_cast<std::uint8_t>(v);
      const auto b = static_cast<std::uint8_t>(v + 1);
      CHECK(rgb_to_gray({a, 10, 10}) < rgb_to_gray({b, 10, 10}));
      CHECK(rgb_to_gray({10, a, 10}) < rgb_to_gray({10, b, 10}));
      CHECK(rgb_to_gray({10, 10, a}) < rgb_to_gray({10, 10, b}));
    }
  }

  TEST_CASE("corners of the box land in distinct cells") {
    Box box{{0, 0, 0}, {1, 1, 1}};
    PointCloudFrame f;
    for (int i = 0; i < 8; ++i) f.points.push_back({{double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)}, {}});
    const auto tiled = tile_frame(f, {2, 2, 2}, box);
    REQUIRE(tiled.tiles.size() == 8);
    for (const auto& t : tiled.tiles) CHECK(t.size() == 1);
  }

  TEST_CASE("single cell grid keeps every point") {
    const auto f = random_frame(200, 1);
    const auto tiled = tile_frame(f, {1, 1, 1}, bounding_box(f.points));
    REQUIRE(tiled.tiles.size() == 1);
    CHECK(tiled.tiles[0].size() == 200);
  }

  TEST_CASE("tiling is an exhaustive disjoint partition") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto f = random_frame(500, seed);
      const auto tiled = tile_frame(f, {2, 3, 2}, bounding_box(f.points));
      std::vector<std::size_t> all;
      for (const auto& t : tiled.tiles) all.insert(all.end(), t.begin(), t.end());
      std::sort(all.begin(), all.end());
      REQUIRE(all.size() == f.size());
      for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    }
  }

  TEST_CASE("tile id depends on position only") {
    const Box box{{-1, -1, -1}, {3, 2, 1}};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(-1, 3), uy(-1, 2), uz(-1, 1);
    for (int k = 0; k < 200; ++k) {
      const Vec3 p{ux(rng), uy(rng), uz(rng)};
      PointCloudFrame a, b;
      a.points = {{p, {}}};
      b = random_frame(50, k);
      for (auto& q : b.points) q.position = {std::clamp(q.position.x, -1.0, 3.0), std::clamp(q.position.y, -1.0, 2.0),
                                             std::clamp(q.position.z, -1.0, 1.0)};
      b.points.push_back({p, {}});
      const auto ta = tile_frame(a, {2, 3, 2}, box);
      const auto tb = tile_frame(b, {2, 3, 2}, box);
      int ja = -1, jb = -1;
      for (int j = 0; j < 12; ++j) {
        if (!ta.tiles[j].empty()) ja = j;
        if (std::count(tb.tiles[j].begin(), tb.tiles[j].end(), b.size() - 1)) jb = j;
      }
      CHECK(ja == jb);
      CHECK(ja == tile_of(p, {2, 3, 2}, box));
    }
  }

  TEST_CASE("identical frames tile identically") {
    const auto f = random_frame(300, 9);
    auto g = f;
    g.frame_index = 4;
    const auto box = bounding_box(f.points);
    CHECK(tile_frame(f, {2, 3, 2}, box).tiles == tile_frame(g, {2, 3, 2}, box).tiles);
  }

  TEST_CASE("points outside the box are reported") {
    PointCloudFrame f;
    f.points = {{{0.5, 0.5, 0.5}, {}}, {{2, 0, 0}, {}}};
    try {
      tile_frame(f, {2, 2, 2}, Box{{0, 0, 0}, {1, 1, 1}});
      FAIL("expected OutOfBoundsError");
    } catch (const OutOfBoundsError& e) {
      CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
    CHECK_THROWS_AS(tile_frame(f, {0, 1, 1}, Box{{0, 0, 0}, {3, 3, 3}}), std::invalid_argument);
  }
}

TEST_SUITE("ply") {
  TEST_CASE("ascii fixture parses exactly") {
    const auto dir = scratch_dir("ply_ascii");
    write_text(dir / "a.ply",
               "ply\nformat ascii 1.0\ncomment frame_index 12\nelement vertex 3\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
               "0 0 0 255 0 0\n1.5 -2.25 3 0 255 0\n0.1 0.2 0.3 1 2 3\n");
    const auto f = load_ply(dir / "a.ply");
    REQUIRE(f.size() == 3);
    CHECK(f.frame_index == 12);
    CHECK(f.points[1].position == Vec3{1.5, -2.25, 3.0});
    CHECK(f.points[2].position.x == static_cast<double>(0.1f));
    CHECK(f.points[0].color == Color{255, 0, 0});
    CHECK(f.points[2].color == Color{1, 2, 3});
  }

  TEST_CASE("binary round trip is bit exact") {
    const auto dir = scratch_dir("ply_bin");
    const auto f = random_frame(1000, 42);
    save_ply(dir / "f.ply", f);
    CHECK(load_ply(dir / "f.ply") == f);
    save_ply(dir / "g.ply", f, PlyFormat::ascii);
    CHECK(load_ply(dir / "g.ply") == f);
  }

  TEST_CASE("truncated body") {
    const auto dir = scratch_dir("ply_trunc");
    auto f = random_frame(10, 1);
    save_ply(dir / "f.ply", f);
    const auto size = fs::file_size(dir / "f.ply");
    fs::resize_file(dir / "f.ply", size - 3 * 15);
    CHECK_THROWS_AS(load_ply(dir / "f.ply"), CorruptFileError);

    std::string text = "ply\nformat ascii 1.0\nelement vertex 10\nproperty float x\nproperty float y\n"
                       "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (int i = 0; i < 7; ++i) text += "0 0 0 1 1 1\n";
    write_text(dir / "a.ply", text);
    CHECK_THROWS_AS(load_ply(dir / "a.ply"), CorruptFileError);
  }

  TEST_CASE("malformed and unsupported headers") {
    const auto dir = scratch_dir("ply_bad");
    write_text(dir / "a.ply", "ply\nformat ascii 1.0\nelement vertex x\nend_header\n");
    try {
      load_ply(dir / "a.ply");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("element vertex x") != std::string::npos);
    }
    write_text(dir / "b.ply",
               "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
               "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    CHECK_THROWS_AS(load_ply(dir / "b.ply"), UnsupportedFormatError);
    write_text(dir / "c.ply",
               "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty float y\n"
               "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n");
    CHECK_THROWS_AS(load_ply(dir / "c.ply"), UnsupportedFormatError);
    CHECK_THROWS_AS(load_ply(dir / "missing.ply"), IoError);
  }
}

TEST_SUITE("manifest") {
  TEST_CASE("key value parsing") {
    const auto kv = KeyValueFile::parse("# c\n a = 1 \n\nb=two words\n");
    CHECK(kv.at("a") == "1");
    CHECK(kv.at("b") == "two words");
    CHECK_THROWS_AS(kv.at("c"), ParseError);
    CHECK_THROWS_AS(KeyValueFile::parse("a = 1\na = 2\n"), ParseError);
    CHECK_THROWS_AS(KeyValueFile::parse("novalue\n"), ParseError);
    CHECK(KeyValueFile::parse(kv.dump()).entries == kv.entries);
  }

  TEST_CASE("manifest round trip") {
    const auto dir = scratch_dir("manifest");
    SequenceManifest m;
    m.frames = {dir / "f0.ply", dir / "f1.ply"};
    m.global_bbox = {{-1, -2, -3}, {1, 2, 3.5}};
    m.grid = {2, 3, 2};
    m.trajectory = dir / "traj.csv";
    save_ply(m.frames[0], random_frame(20, 0));
    save_ply(m.frames[1], random_frame(20, 1));
    m.write(dir / "seq.manifest");
    const auto back = SequenceManifest::read(dir / "seq.manifest");
    CHECK(back.frames == m.frames);
    CHECK(back.global_bbox == m.global_bbox);
    CHECK(back.grid == m.grid);
    CHECK(back.trajectory == m.trajectory);
    CHECK(back.labels.empty());
    const auto frames = back.load_frames();
    REQUIRE(frames.size() == 2);
    CHECK(frames[1].frame_index == 1);
  }
}
