#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "voxport/cli.hpp"
#include "voxport/config.hpp"

using namespace voxport;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"voxport"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("voxport_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-scene is byte-identical under a fixed seed") {
    const auto a = scratch("scene_a"), b = scratch("scene_b");
    REQUIRE(cli({"gen-scene", "--seed", "7", "--out", a.string()}).code == kExitOk);
    REQUIRE(cli({"gen-scene", "--seed", "7", "--out", b.string()}).code == kExitOk);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      CAPTURE(e.path().filename().string());
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
      ++files;
    }
    CHECK(files == 12);  // 10 frames, trajectory, manifest
    const auto c = scratch("scene_c");
    REQUIRE(cli({"gen-scene", "--seed", "8", "--out", c.string()}).code == kExitOk);
    CHECK(slurp(a / "trajectory.csv") != slurp(c / "trajectory.csv"));
  }

  TEST_CASE("sample-bench writes one row per method and the IFMI table") {
    const auto dir = scratch("bench");
    const auto r = cli({"sample-bench", "--methods", "urs,rs,fps", "--points", "100000", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    const auto bench = lines(dir / "sample_bench.csv");
    REQUIRE(bench.size() == 4);
    CHECK(bench[0] == "method,n_points,time_ms,peak_bytes");
    CHECK(bench[1].rfind("URS,100000,", 0) == 0);
    CHECK(bench[2].rfind("RS,100000,", 0) == 0);
    CHECK(bench[3].rfind("FPS,100000,", 0) == 0);
    const auto table = lines(dir / "ifmi.csv");
    REQUIRE(table.size() == 4);
    CHECK(table[0].rfind("method,0.1,", 0) == 0);
  }

  TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    auto r = cli({});
    CHECK(r.code == kExitValidation);
    r = cli({"gen-scene", "--bogus"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(cli({"tile", "--input", (dir / "missing.ply").string(), "--out", dir.string()}).code == kExitIo);
    CHECK(cli({"gt-gen", "--scene", (dir / "missing.txt").string(), "--out", dir.string()}).code == kExitIo);
    CHECK(cli({"gen-scene", "--path", "spiral", "--out", dir.string()}).code == kExitValidation);
    CHECK(cli({"sample-bench", "--methods", "nope", "--out", dir.string()}).code == kExitValidation);
    std::ofstream(dir / "bad.cfg") << "points = 1000\ncubes = 64\n";
    CHECK(cli({"train", "--config", (dir / "bad.cfg").string(), "--scene", "x", "--out", dir.string()}).code ==
          kExitValidation);
    // Unparseable content is a validation error; unreadable bytes are I/O.
    std::ofstream(dir / "junk.ply") << "not a ply file\n";
    CHECK(cli({"tile", "--input", (dir / "junk.ply").string(), "--out", dir.string()}).code == kExitValidation);
    std::ofstream(dir / "short.ply") << "ply\nformat binary_little_endian 1.0\nelement vertex 10\n"
                                        "property float x\nproperty float y\nproperty float z\n"
                                        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    CHECK(cli({"tile", "--input", (dir / "short.ply").string(), "--out", dir.string()}).code == kExitIo);
  }

  TEST_CASE("tile and gt-gen on a generated sequence") {
    const auto dir = scratch("tile");
    REQUIRE(cli({"gen-scene", "--frames", "2", "--out", dir.string()}).code == kExitOk);
    const auto manifest = (dir / "manifest.txt").string();
    REQUIRE(cli({"tile", "--manifest", manifest, "--out", dir.string()}).code == kExitOk);
    CHECK(lines(dir / "tiles.csv").size() == 1 + 2 * 12);
    REQUIRE(cli({"gt-gen", "--scene", manifest, "--coverage-frames", "2", "--out", dir.string()}).code == kExitOk);
    CHECK(lines(dir / "coverage.csv").size() == 1 + 8);
    CHECK(fs::file_size(dir / "labels.csv") > 0);
  }

  TEST_CASE("train, predict and eval round trip") {
    const auto dir = scratch("e2e");
    REQUIRE(cli({"gen-scene", "--frames", "3", "--density", "40", "--out", dir.string()}).code == kExitOk);
    PipelineConfig cfg;
    cfg.points = 128;
    cfg.cubes = 16;
    cfg.k = 8;
    cfg.widths = {8, 16, 32};
    cfg.steps = 3;
    cfg.test_frames = 1;
    cfg.traj_hidden = 8;
    cfg.traj_window = 2;
    cfg.traj_steps = 10;
    cfg.save(dir / "small.cfg");
    const auto config = (dir / "small.cfg").string(), manifest = (dir / "manifest.txt").string();
    const auto train_dir = dir / "train", pred_a = dir / "pa", pred_b = dir / "pb", eval_dir = dir / "eval";

    auto r = cli({"train", "--config", config, "--scene", manifest, "--out", train_dir.string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    CHECK(PipelineConfig::load(train_dir / "config.cfg") == cfg);
    const auto metrics = lines(train_dir / "metrics.csv");
    REQUIRE(metrics.size() >= 2);
    CHECK(metrics[0] == "epoch,loss,point_miou,tile_miou,oa,precision,recall");

    const auto ckpt = (train_dir / "model.ckpt").string();
    for (const auto& out : {pred_a, pred_b}) {
      r = cli({"predict", "--config", config, "--scene", manifest, "--checkpoint", ckpt, "--out", out.string()});
      REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    }
    CHECK(slurp(pred_a / "predictions.csv") == slurp(pred_b / "predictions.csv"));

    r = cli({"eval", "--config", config, "--scene", manifest, "--pred", (pred_a / "predictions.csv").string(), "--out",
             eval_dir.string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const auto report = lines(eval_dir / "report.csv");
    REQUIRE(report.size() == 2);
    CHECK(report[0] == "frames,points,oa,precision,recall,point_miou,tile_miou,tiles,empty_tiles");
    CHECK(report[1].rfind("1,", 0) == 0);
    CHECK(lines(eval_dir / "tiles.csv").size() > 1);

    CHECK(cli({"predict", "--config", config, "--scene", manifest, "--checkpoint", (dir / "none.ckpt").string(),
               "--out", pred_a.string()})
              .code == kExitIo);
    std::ofstream(dir / "broken.ckpt") << "garbage";
    CHECK(cli({"predict", "--config", config, "--scene", manifest, "--checkpoint", (dir / "broken.ckpt").string(),
               "--out", pred_a.string()})
              .code == kExitIo);
  }
}
