#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "voxport/ad/checkpoint.hpp"
#include "voxport/errors.hpp"
#include "voxport/pipeline.hpp"
#include "voxport/scene.hpp"

using namespace voxport;

namespace {

std::filesystem::path source_dir() { return std::filesystem::path(VOXPORT_SOURCE_DIR); }

SyntheticSceneSpec small_spec(std::size_t frames) {
  SyntheticSceneSpec s;
  s.frames = frames;
  s.shell_density = 40.0;
  s.object_points = 200;
  s.moving_points = 400;
  return s;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.points = 128;
  c.cubes = 16;
  c.k = 8;
  c.widths = {8, 16, 32};
  c.batch = 4;
  c.steps = 6;
  c.test_frames = 0;
  c.traj_hidden = 8;
  c.traj_window = 2;
  c.traj_steps = 20;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config round trip") {
    PipelineConfig c;
    CHECK(PipelineConfig::from_kv(KeyValueFile::parse(c.dump())) == c);
    c.seed = 18446744073709551615ULL;
    c.widths = {8, 16, 32};
    c.fov.horizontal_half_deg = 47.25;
    c.lr = 0.1 + 0.2;
    c.scene = "seq/manifest.txt";
    CHECK(PipelineConfig::from_kv(KeyValueFile::parse(c.dump())) == c);
    CHECK_THROWS_AS(PipelineConfig::from_kv(KeyValueFile::parse("nope = 1\n")), ParseError);
    CHECK_THROWS_AS(PipelineConfig::from_kv(KeyValueFile::parse("points = -4\n")), ParseError);
    CHECK(PipelineConfig::from_kv(KeyValueFile::parse("batch = 2\n")).batch == 2);
  }

  TEST_CASE("config validation") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.points = 1000;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.tiles = 10;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.widths = {8, 15};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("shipped configs") {
    const auto toy = PipelineConfig::load(source_dir() / "configs/toy.cfg");
    CHECK_NOTHROW(toy.validate());
    CHECK(toy.points == 1024);
    CHECK(toy.cubes == 64);
    CHECK(toy.widths == std::vector<std::size_t>{8, 16, 32, 64, 128, 256});
    const auto paper = PipelineConfig::load(source_dir() / "configs/paper.cfg");
    CHECK_NOTHROW(paper.validate());
    CHECK(paper.points == 12288);
    CHECK(paper.cubes == 512);
    CHECK(paper.batch == 4);
    CHECK(paper.widths == std::vector<std::size_t>{8, 32, 128, 256, 512, 1024});
  }

  TEST_CASE("scene generation") {
    auto spec = small_spec(2);
    const auto a = generate_scene(spec), b = generate_scene(spec);
    CHECK(a.frames == b.frames);
    CHECK(a.trajectories == b.trajectories);
    CHECK(a.frames[0].size() == a.frames[1].size());
    const std::size_t shell = static_cast<std::size_t>(std::lround(2.0 * (6 * 3 + 6 * 6 + 3 * 6) * 40.0));
    CHECK(a.frames[0].size() == shell + 4 * 200 + 400);
    CHECK(a.trajectories.size() == 2 * spec.users);
    CHECK(a.frames[0] != a.frames[1]);

    spec.velocity = {0, 0, 0};
    const auto still = generate_scene(spec);
    CHECK(still.frames[0].points == still.frames[1].points);

    const auto s = look_at({0, 0, 0}, {3, 0, 0});
    CHECK(s.beta == doctest::Approx(90.0));
    CHECK(s.alpha == doctest::Approx(0.0));
  }

  TEST_CASE("default scene ground-truth positive rate") {
    const auto sc = generate_scene(SyntheticSceneSpec{});
    PipelineConfig cfg;
    const auto data = make_scene_data(sc.frames, sc.trajectories, sc.bbox, cfg);
    double pos = 0, total = 0;
    for (const auto& l : data.labels) {
      for (auto v : l.labels) pos += v;
      total += static_cast<double>(l.labels.size());
    }
    MESSAGE("positive rate " << pos / total);
    CHECK(pos / total > 0.05);
    CHECK(pos / total < 0.60);
  }

  TEST_CASE("scene files round trip and trajectory validation") {
    const auto dir = std::filesystem::temp_directory_path() / "voxport_test_scene";
    std::filesystem::remove_all(dir);
    const auto sc = generate_scene(small_spec(3));
    write_scene(sc, dir);
    const auto cfg = small_config();
    const auto data = load_scene(dir / "manifest.txt", cfg);
    CHECK(data.frames.size() == 3);
    CHECK(data.users.size() == 8);
    CHECK(data.frames[2].points == sc.frames[2].points);

    auto rows = sc.trajectories;
    rows.pop_back();
    CHECK_THROWS_AS(make_scene_data(sc.frames, rows, sc.bbox, cfg), std::invalid_argument);
  }

  TEST_CASE("two-frame training smoke run and predict from checkpoint") {
    const auto sc = generate_scene(small_spec(2));
    const auto cfg = small_config();
    const auto data = make_scene_data(sc.frames, sc.trajectories, sc.bbox, cfg);
    auto r = train_pipeline(data, cfg, 1);
    CHECK(r.steps == cfg.steps);
    CHECK(r.tile_pairs == 12);
    CHECK_FALSE(r.log.front().eval.has_value());

    const auto dir = std::filesystem::temp_directory_path() / "voxport_test_train";
    std::filesystem::create_directories(dir);
    ad::save_checkpoint(dir / "model.ckpt", r.params);
    write_metrics_csv(dir / "metrics.csv", r.log);
    auto loaded = init_pipeline_params(cfg);
    ad::load_checkpoint_into(dir / "model.ckpt", loaded);
    const std::vector<std::size_t> frames{1};
    const auto a = predict_frames(data, r.params, cfg, frames, 1);
    const auto b = predict_frames(data, loaded, cfg, frames, 2);
    CHECK(a == b);
    CHECK(a[0].labels.size() == data.frames[1].size());
    std::ifstream in(dir / "metrics.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,loss,point_miou,tile_miou,oa,precision,recall");
  }

  TEST_CASE("training is deterministic across thread counts") {
    const auto sc = generate_scene(small_spec(2));
    auto cfg = small_config();
    cfg.steps = 3;
    const auto data = make_scene_data(sc.frames, sc.trajectories, sc.bbox, cfg);
    const auto one = train_pipeline(data, cfg, 1);
    const auto three = train_pipeline(data, cfg, 3);
    CHECK(one.params.values() == three.params.values());
    CHECK(one.log.back().loss == three.log.back().loss);
  }

  TEST_CASE("training loss falls over the first epochs") {
    const auto sc = generate_scene(small_spec(4));
    auto cfg = small_config();
    cfg.test_frames = 1;
    cfg.steps = 45;  // 24 tile pairs, 6 steps per epoch
    cfg.lr = 2e-3;
    const auto data = make_scene_data(sc.frames, sc.trajectories, sc.bbox, cfg);
    const auto r = train_pipeline(data, cfg, 1);
    REQUIRE(r.log.size() >= 5);
    for (std::size_t e = 1; e < 5; ++e) CHECK(r.log[e].loss < r.log[e - 1].loss);
    CHECK(r.log.back().eval.has_value());
  }
}
