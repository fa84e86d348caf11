#include "voxport/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "voxport/ad/checkpoint.hpp"
#include "voxport/csv.hpp"
#include "voxport/errors.hpp"
#include "voxport/eval.hpp"
#include "voxport/manifest.hpp"
#include "voxport/memprobe.hpp"
#include "voxport/parallel.hpp"
#include "voxport/pipeline.hpp"
#include "voxport/ply.hpp"
#include "voxport/sampling.hpp"
#include "voxport/scene.hpp"

namespace voxport {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 0;
  std::string config;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return c.out;
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : PipelineConfig::load(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  return cfg;
}

GridDims parse_grid(const std::string& s) {
  const auto g = parse_longs(s, "grid");
  if (g.size() != 3 || g[0] < 1 || g[1] < 1 || g[2] < 1) throw std::invalid_argument("--grid needs three positive integers");
  return {int(g[0]), int(g[1]), int(g[2])};
}

Vec3 parse_vec3(const std::string& s, const std::string& what) {
  const auto v = parse_doubles(s, what);
  if (v.size() != 3) throw std::invalid_argument(what + " needs three numbers");
  return {v[0], v[1], v[2]};
}

// ---- tile ----------------------------------------------------------------

struct TileArgs {
  std::string input, manifest, grid = "2,3,2";
};

void cmd_tile(const Common& c, const TileArgs& a, std::ostream& out) {
  std::vector<PointCloudFrame> frames;
  Box bbox;
  GridDims grid = parse_grid(a.grid);
  if (!a.manifest.empty()) {
    const auto m = SequenceManifest::read(a.manifest);
    frames = m.load_frames();
    bbox = m.global_bbox;
    grid = m.grid;
  } else if (!a.input.empty()) {
    frames.push_back(load_ply(a.input));
    bbox = bounding_box(std::span<const PointCloudFrame>(frames));
  } else {
    throw std::invalid_argument("tile needs --input or --manifest");
  }
  const auto dir = out_dir(c);
  auto summary = open_out(dir / "tiles.csv");
  auto assign = open_out(dir / "assignment.csv");
  summary << "frame,tile,points\n";
  assign << "frame,point_index,tile\n";
  for (const auto& f : frames) {
    const auto t = tile_frame(f, grid, bbox);
    std::vector<int> owner(f.size());
    for (std::size_t k = 0; k < t.tiles.size(); ++k) {
      summary << f.frame_index << ',' << k << ',' << t.tiles[k].size() << '\n';
      for (const auto i : t.tiles[k]) owner[i] = static_cast<int>(k);
    }
    for (std::size_t i = 0; i < owner.size(); ++i) assign << f.frame_index << ',' << i << ',' << owner[i] << '\n';
  }
  out << "tiled " << frames.size() << " frame(s) into " << grid.cell_count() << " tiles\n";
}

// ---- sample-bench ----------------------------------------------------------

struct BenchArgs {
  std::string methods = "urs,fps,rs,idis,gs,vs";
  std::size_t points = 100000;
  std::size_t sample = 0;
  std::size_t cubes = 512;
  std::string shift = "0.05,0.02,0";
  double color_noise = 2.0;
};

void cmd_sample_bench(const Common& c, const BenchArgs& a, std::ostream& out) {
  std::vector<SamplingMethod> methods;
  {
    std::string m = a.methods;
    for (auto& ch : m) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream in(m);
    for (std::string w; in >> w;) methods.push_back(parse_sampling_method(w));
  }
  if (methods.empty()) throw std::invalid_argument("--methods is empty");
  const std::size_t n = a.sample ? a.sample : std::min<std::size_t>(12288, a.points / 2 / a.cubes * a.cubes);
  if (n == 0) throw std::invalid_argument("--points too small for the cube count");
  const auto [frame, prev] = translated_pair(a.points, parse_vec3(a.shift, "--shift"), a.color_noise, c.seed);
  const auto ctx = DacvvContext::from_tile(frame.points);
  const std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  const auto dir = out_dir(c);
  auto bench = open_out(dir / "sample_bench.csv");
  auto table = open_out(dir / "ifmi.csv");
  bench << "method,n_points,time_ms,peak_bytes\n";
  table << "method";
  for (const double t : thresholds) table << ',' << format_double(t);
  table << '\n';
  for (const auto m : methods) {
    memprobe::reset_peak();
    const std::size_t base = memprobe::current_bytes();
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = sample(frame.points, n, m, a.cubes, c.seed);
    const auto t1 = std::chrono::steady_clock::now();
    const std::size_t peak = memprobe::peak_bytes() - base;
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    bench << to_string(m) << ',' << a.points << ',' << format_double(ms) << ',' << peak << '\n';
    const auto sp = sample(prev.points, n, m, a.cubes, c.seed);
    const auto curve = ifmi_curve(frame.points, s, prev.points, sp, thresholds, ctx);
    table << to_string(m);
    for (const double v : curve) table << ',' << format_double(v);
    table << '\n';
    out << to_string(m) << ": " << ms << " ms, peak " << peak << " bytes, IFMI@0.1 " << curve[0] << '\n';
  }
}

// ---- gt-gen ---------------------------------------------------------------

struct GtArgs {
  std::string scene;
  int freq_threshold = 5;
  double fov_h = 55.0, fov_v = 55.0, near = 0.05;
  std::size_t coverage_frames = 0;
};

void cmd_gt_gen(const Common& c, const GtArgs& a, std::ostream& out) {
  const auto m = SequenceManifest::read(a.scene);
  if (m.trajectory.empty()) throw std::invalid_argument(a.scene + ": no trajectory entry");
  const auto frames = m.load_frames();
  const auto by_user = group_by_user(read_trajectory_csv(m.trajectory));
  const FovParams fov{a.fov_h, a.fov_v, a.near};
  fov.validate();
  std::vector<std::vector<HeadState>> per_frame(frames.size());
  for (const auto& [user, states] : by_user) {
    for (const auto& [t, s] : states) {
      if (t >= frames.size()) throw std::invalid_argument("trajectory frame " + std::to_string(t) + " is past the sequence");
      per_frame[t].push_back(s);
    }
  }
  std::vector<FovLabels> labels(frames.size());
  parallel_for(frames.size(), resolve_threads(c.threads), [&](std::size_t t) {
    labels[t] = build_ground_truth(frames[t], per_frame[t], fov, a.freq_threshold);
  });
  const auto dir = out_dir(c);
  write_labels_csv(dir / "labels.csv", labels);
  double pos = 0, total = 0;
  for (const auto& l : labels) {
    for (const auto v : l.labels) pos += v;
    total += static_cast<double>(l.labels.size());
  }
  out << "labelled " << frames.size() << " frames, positive rate " << (total > 0 ? pos / total : 0.0) << '\n';
  if (a.coverage_frames > 0) {
    const auto rows = overlap_coverage(frames, per_frame, fov, a.coverage_frames, c.seed);
    auto cov = open_out(dir / "coverage.csv");
    cov << "frequency,coverage_exact,coverage_at_least\n";
    for (const auto& r : rows) {
      cov << r.frequency << ',' << format_double(r.coverage_exact) << ',' << format_double(r.coverage_at_least) << '\n';
    }
  }
}

// ---- train / predict / eval -------------------------------------------------

std::string scene_path(const std::string& flag, const PipelineConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.scene.empty()) return cfg.scene;
  throw std::invalid_argument("no scene: pass --scene or set 'scene' in the config");
}

struct TrainArgs {
  std::string scene;
  std::size_t steps = 0;
};

void cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  auto cfg = load_config(c);
  if (a.steps) cfg.steps = a.steps;
  cfg.validate();
  const auto data = load_scene(scene_path(a.scene, cfg), cfg);
  const auto dir = out_dir(c);
  cfg.save(dir / "config.cfg");
  const auto r = train_pipeline(data, cfg, resolve_threads(c.threads), &out);
  ad::save_checkpoint(dir / "model.ckpt", r.params);
  write_metrics_csv(dir / "metrics.csv", r.log);
  out << "trained " << r.steps << " steps on " << r.tile_pairs << " tile pairs (" << r.skipped_tiles
      << " tiles skipped); checkpoint " << (dir / "model.ckpt").string() << '\n';
}

struct PredictArgs {
  std::string scene, checkpoint;
  std::vector<std::size_t> frames;
};

void cmd_predict(const Common& c, const PredictArgs& a, std::ostream& out) {
  const auto cfg = load_config(c);
  cfg.validate();
  const auto data = load_scene(scene_path(a.scene, cfg), cfg);
  auto params = init_pipeline_params(cfg);
  ad::load_checkpoint_into(a.checkpoint, params);
  const auto frames = a.frames.empty() ? test_frame_indices(data, cfg) : a.frames;
  const auto labels = predict_frames(data, params, cfg, frames, resolve_threads(c.threads));
  const auto dir = out_dir(c);
  write_labels_csv(dir / "predictions.csv", labels);
  out << "predicted " << labels.size() << " frame(s)\n";
}

struct EvalArgs {
  std::string scene, pred;
  double tau = -1.0;
};

void cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out) {
  auto cfg = load_config(c);
  if (a.tau >= 0.0) cfg.tau = a.tau;
  cfg.validate();
  const auto data = load_scene(scene_path(a.scene, cfg), cfg);
  const auto pred = read_labels_csv(a.pred);
  std::vector<FovLabels> gt;
  std::vector<TiledFrame> tilings;
  for (const auto& p : pred) {
    if (p.frame_index >= data.frames.size()) throw std::invalid_argument("prediction for unknown frame " + std::to_string(p.frame_index));
    gt.push_back(data.labels[p.frame_index]);
    tilings.push_back(data.tilings[p.frame_index]);
  }
  const auto report = evaluate(pred, gt, tilings, cfg.tau);
  const auto dir = out_dir(c);
  write_report_csv(dir / "report.csv", report);
  write_tile_table_csv(dir / "tiles.csv", report.tile_rows);
  out << "point MIoU " << report.point.miou << ", tile MIoU "
      << (report.tile_miou ? format_double(*report.tile_miou) : std::string("NA")) << ", OA " << report.point.oa
      << '\n';
}

// ---- gen-scene ------------------------------------------------------------

struct SceneArgs {
  std::size_t frames = 10, users = 8;
  std::string velocity = "0.3,0,0";
  std::string path = "orbit";
  double noise = 2.0;
  double density = 320.0;
};

void cmd_gen_scene(const Common& c, const SceneArgs& a, std::ostream& out) {
  SyntheticSceneSpec spec;
  spec.seed = c.seed;
  spec.frames = a.frames;
  spec.users = a.users;
  spec.velocity = parse_vec3(a.velocity, "--velocity");
  if (a.path == "orbit") spec.path = ViewerPath::orbit;
  else if (a.path == "line") spec.path = ViewerPath::line;
  else throw std::invalid_argument("--path must be orbit or line");
  spec.noise_deg = a.noise;
  spec.shell_density = a.density;
  const auto scene = generate_scene(spec);
  write_scene(scene, out_dir(c));
  out << "wrote " << scene.frames.size() << " frames of " << scene.frames[0].size() << " points to " << c.out << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volumetric video viewport prediction toolkit", "voxport"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub, bool with_config) {
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { common.seed = s, common.seed_set = true; }, "Master seed");
    sub->add_option("--threads", common.threads, "Worker threads (VOXPORT_THREADS overrides)");
    if (with_config) sub->add_option("--config", common.config, "Pipeline config file");
  };

  TileArgs tile;
  auto* tile_cmd = app.add_subcommand("tile", "Partition frames into grid tiles");
  add_common(tile_cmd, false);
  tile_cmd->add_option("--input", tile.input, "Single PLY frame");
  tile_cmd->add_option("--manifest", tile.manifest, "Sequence manifest");
  tile_cmd->add_option("--grid", tile.grid, "Grid dims gx,gy,gz (single-frame mode)")->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("sample-bench", "Time, memory and IFMI of the samplers");
  add_common(bench_cmd, false);
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated methods")->capture_default_str();
  bench_cmd->add_option("--points", bench.points, "Points in the synthetic frame")->capture_default_str();
  bench_cmd->add_option("--sample", bench.sample, "Sample size (default min(12288, points/2))");
  bench_cmd->add_option("--cubes", bench.cubes, "URS cube count")->capture_default_str();
  bench_cmd->add_option("--shift", bench.shift, "Translation between the two frames")->capture_default_str();
  bench_cmd->add_option("--color-noise", bench.color_noise, "Color noise on the second frame")->capture_default_str();

  GtArgs gt;
  auto* gt_cmd = app.add_subcommand("gt-gen", "Ground-truth labels from multi-user trajectories");
  add_common(gt_cmd, false);
  gt_cmd->add_option("--scene", gt.scene, "Sequence manifest")->required();
  gt_cmd->add_option("--freq-threshold", gt.freq_threshold, "Users needed for label 1")->capture_default_str();
  gt_cmd->add_option("--fov-h", gt.fov_h, "Horizontal half-angle, degrees")->capture_default_str();
  gt_cmd->add_option("--fov-v", gt.fov_v, "Vertical half-angle, degrees")->capture_default_str();
  gt_cmd->add_option("--near", gt.near, "Near distance")->capture_default_str();
  gt_cmd->add_option("--coverage-frames", gt.coverage_frames, "Frames sampled for the overlap table (0 = skip)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the full pipeline");
  add_common(train_cmd, true);
  train_cmd->add_option("--scene", train.scene, "Sequence manifest");
  train_cmd->add_option("--steps", train.steps, "Override the config step count");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Per-point FoV labels from a checkpoint");
  add_common(predict_cmd, true);
  predict_cmd->add_option("--scene", predict.scene, "Sequence manifest");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Parameter file")->required();
  predict_cmd->add_option("--frames", predict.frames, "Frame indices (default: held-out frames)")->delimiter(',');

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Point and tile metrics of a prediction file");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--scene", ev.scene, "Sequence manifest");
  eval_cmd->add_option("--pred", ev.pred, "Predicted labels CSV")->required();
  eval_cmd->add_option("--tau", ev.tau, "Tile positive fraction (default from config)");

  SceneArgs scene;
  auto* scene_cmd = app.add_subcommand("gen-scene", "Write a synthetic sequence");
  add_common(scene_cmd, false);
  scene_cmd->add_option("--frames", scene.frames, "Frame count")->capture_default_str();
  scene_cmd->add_option("--users", scene.users, "Viewer count")->capture_default_str();
  scene_cmd->add_option("--velocity", scene.velocity, "Moving cube velocity per frame")->capture_default_str();
  scene_cmd->add_option("--path", scene.path, "Viewer path: orbit or line")->capture_default_str();
  scene_cmd->add_option("--noise", scene.noise, "Gaze jitter, degrees")->capture_default_str();
  scene_cmd->add_option("--density", scene.density, "Room shell points per square meter")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  try {
    if (*tile_cmd) cmd_tile(common, tile, out);
    else if (*bench_cmd) cmd_sample_bench(common, bench, out);
    else if (*gt_cmd) cmd_gt_gen(common, gt, out);
    else if (*train_cmd) cmd_train(common, train, out);
    else if (*predict_cmd) cmd_predict(common, predict, out);
    else if (*eval_cmd) cmd_eval(common, ev, out);
    else if (*scene_cmd) cmd_gen_scene(common, scene, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const CorruptFileError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const UnsupportedFormatError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace voxport
