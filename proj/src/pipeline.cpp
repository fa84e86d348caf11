#include "voxport/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "voxport/ad/optim.hpp"
#include "voxport/csv.hpp"
#include "voxport/errors.hpp"
#include "voxport/fusion.hpp"
#include "voxport/knn.hpp"
#include "voxport/manifest.hpp"
#include "voxport/parallel.hpp"
#include "voxport/sampling.hpp"

namespace voxport {
namespace {

// Sampled tile plus the geometry the encoder needs, cached per (frame, tile).
struct TileInput {
  bool ok = false;
  std::vector<std::size_t> indices;  // into the frame
  std::vector<Vec3> positions;
  PointHierarchy hierarchy;
  ad::Tensor inputs;
};

TileInput prepare_tile(const PointCloudFrame& frame, const TiledFrame& tiling, int tile, const PipelineConfig& cfg,
                       const SaliencyConfig& sal) {
  TileInput in;
  if (tiling.tiles[tile].size() < cfg.points) return in;
  const auto s = sample_frame_tile(frame, tiling, tile, cfg.points, SamplingMethod::URS, cfg.cubes,
                                   derive_seed(cfg.seed, {0x5A, static_cast<std::uint64_t>(tile)}));
  in.indices = s.point_indices;
  std::vector<Color> colors;
  std::vector<double> grays;
  for (const auto i : in.indices) {
    const auto& p = frame.points[i];
    in.positions.push_back(p.position);
    colors.push_back(p.color);
    grays.push_back(rgb_to_gray(p.color) / 255.0);
  }
  in.hierarchy = build_hierarchy(in.positions, grays, sal, derive_seed(cfg.seed, {0x48, static_cast<std::uint64_t>(tile)}));
  in.inputs = point_inputs(in.positions, colors);
  in.ok = true;
  return in;
}

using TileCache = std::vector<std::vector<TileInput>>;  // [frame][tile]

TileCache prepare_tiles(const SceneData& scene, std::span<const std::size_t> frames, const PipelineConfig& cfg,
                        std::size_t threads) {
  const auto sal = saliency_config(cfg);
  TileCache cache(scene.frames.size());
  std::vector<std::pair<std::size_t, int>> jobs;
  for (const auto t : frames) {
    cache[t].resize(cfg.tiles);
    for (std::size_t k = 0; k < cfg.tiles; ++k) jobs.emplace_back(t, static_cast<int>(k));
  }
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto [t, k] = jobs[j];
    cache[t][k] = prepare_tile(scene.frames[t], scene.tilings[t], k, cfg, sal);
  });
  return cache;
}

// Head state each user is predicted to have at every frame, from the frames
// before it. Short histories fall back to the last known state.
std::vector<std::vector<HeadState>> predicted_states(const SceneData& scene, const ad::ParamStore& lstm,
                                                     bool trained, std::size_t window) {
  std::vector<std::vector<HeadState>> out(scene.users.size());
  for (std::size_t u = 0; u < scene.users.size(); ++u) {
    const auto& seq = scene.users[u];
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (t == 0) {
        out[u].push_back(seq[0]);
        continue;
      }
      const std::size_t begin = t > window ? t - window : 0;
      const std::span<const HeadState> history(seq.data() + begin, t - begin);
      out[u].push_back(trained && history.size() >= 2 ? predict_head_state(history, lstm) : history.back());
    }
  }
  return out;
}

std::size_t fl_user(std::size_t frame, std::size_t tile, std::size_t users) { return (frame + tile) % users; }

ad::Tensor fl_inputs(const TileInput& in, const HeadState& predicted, const FovParams& fov) {
  const auto fr = head_state_to_frustum(predicted, fov);
  std::vector<Color> colors;
  colors.reserve(in.positions.size());
  for (const auto& p : in.positions) colors.push_back(in_fov(fr, p) ? Color{255, 255, 255} : Color{0, 0, 0});
  return point_inputs(in.positions, colors);
}

Prediction forward(ad::Tape& tape, const TileInput& cur, const TileInput& prev, const ad::Tensor& fl,
                   const ad::ParamStore& store, const SaliencyConfig& sal, bool training, Rng& rng, double dropout) {
  const auto enc = encode_pair(tape, cur.hierarchy, cur.inputs, prev.hierarchy, prev.inputs, store, sal);
  const auto fs = decode(tape, enc.spatial, cur.hierarchy, store, sal, Branch::spatial);
  const auto ft = decode(tape, enc.temporal, cur.hierarchy, store, sal, Branch::temporal);
  return fuse_and_classify(tape, fs, ft, render_lstm_feature(tape, fl, store), store, training, rng, dropout);
}

[[noreturn]] void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const IoError& e) {
    throw IoError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

std::string context(std::size_t frame, std::size_t tile) {
  return "frame " + std::to_string(frame) + ", tile " + std::to_string(tile);
}

struct Predictor {
  const SceneData& scene;
  const ad::ParamStore& params;
  const PipelineConfig& cfg;
  SaliencyConfig sal;
  std::vector<std::vector<HeadState>> predicted;

  FovLabels frame_labels(const TileCache& cache, std::size_t t) const {
    const std::size_t prev = t > 0 ? t - 1 : t;
    FovLabels out{t, std::vector<std::uint8_t>(scene.frames[t].size(), 0)};
    for (std::size_t k = 0; k < cfg.tiles; ++k) {
      const auto& cur = cache[t][k];
      const auto& before = cache[prev][k];
      if (!cur.ok || !before.ok) continue;
      try {
        ad::Tape tape(false);
        Rng unused(0);
        const auto fl = fl_inputs(cur, predicted[fl_user(t, k, scene.users.size())][t], cfg.fov);
        const auto p = forward(tape, cur, before, fl, params, sal, false, unused, 0.0);
        const KnnIndex index{std::span<const Vec3>(cur.positions)};
        for (const auto i : scene.tilings[t].tiles[k]) {
          out.labels[i] = p.labels[index.knn(scene.frames[t].points[i].position, 1)[0]];
        }
      } catch (...) {
        rethrow_with_context(context(t, k));
      }
    }
    return out;
  }
};

std::vector<std::size_t> with_previous(std::span<const std::size_t> frames) {
  std::vector<std::size_t> all;
  for (const auto t : frames) {
    all.push_back(t);
    if (t > 0) all.push_back(t - 1);
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

EvalReport evaluate_frames(const SceneData& scene, const Predictor& pred, const TileCache& cache,
                           std::span<const std::size_t> frames, std::size_t threads, double tau) {
  std::vector<FovLabels> p(frames.size()), g;
  std::vector<TiledFrame> tilings;
  parallel_for(frames.size(), threads, [&](std::size_t j) { p[j] = pred.frame_labels(cache, frames[j]); });
  for (const auto t : frames) {
    g.push_back(scene.labels[t]);
    tilings.push_back(scene.tilings[t]);
  }
  return evaluate(p, g, tilings, tau);
}

std::vector<std::vector<HeadState>> user_sequences(const SceneData& scene, std::size_t frames) {
  std::vector<std::vector<HeadState>> seqs;
  for (const auto& u : scene.users) seqs.emplace_back(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(frames));
  return seqs;
}

}  // namespace

SaliencyConfig saliency_config(const PipelineConfig& cfg) {
  SaliencyConfig s;
  s.widths = cfg.widths;
  s.k = cfg.k;
  return s;
}

ad::ParamStore init_pipeline_params(const PipelineConfig& cfg) {
  ad::ParamStore store;
  Rng rng(derive_seed(cfg.seed, {0x50}));
  init_saliency_params(store, saliency_config(cfg), rng);
  init_fl_params(store, cfg.widths[0], rng);
  init_fusion_params(store, cfg.widths[0], rng);
  init_lstm_params(store, cfg.traj_hidden, rng);
  return store;
}

SceneData make_scene_data(std::vector<PointCloudFrame> frames, std::span<const TrajectoryRow> trajectories,
                          const Box& bbox, const PipelineConfig& cfg, const std::vector<FovLabels>* labels) {
  if (frames.empty()) throw std::invalid_argument("scene has no frames");
  SceneData s;
  s.frames = std::move(frames);
  for (std::size_t t = 0; t < s.frames.size(); ++t) s.frames[t].frame_index = t;
  for (const auto& f : s.frames) s.tilings.push_back(tile_frame(f, cfg.grid, bbox));

  for (const auto& [user, states] : group_by_user(trajectories)) {
    if (states.size() != s.frames.size()) {
      throw std::invalid_argument("user " + std::to_string(user) + " has " + std::to_string(states.size()) +
                                  " trajectory rows for " + std::to_string(s.frames.size()) + " frames");
    }
    std::vector<HeadState> seq;
    for (std::size_t t = 0; t < states.size(); ++t) {
      if (states[t].first != t) throw std::invalid_argument("user " + std::to_string(user) + " skips frame " + std::to_string(t));
      seq.push_back(states[t].second);
    }
    s.users.push_back(std::move(seq));
  }
  if (s.users.empty()) throw std::invalid_argument("scene has no trajectories");

  if (labels) {
    if (labels->size() != s.frames.size()) throw std::invalid_argument("label frames do not match the sequence");
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      if ((*labels)[t].labels.size() != s.frames[t].size()) {
        throw std::invalid_argument("labels for frame " + std::to_string(t) + " do not cover its points");
      }
    }
    s.labels = *labels;
  } else {
    for (const auto& f : s.frames) {
      std::vector<HeadState> at_t;
      for (const auto& u : s.users) at_t.push_back(u[f.frame_index]);
      s.labels.push_back(build_ground_truth(f, at_t, cfg.fov, cfg.freq_threshold));
    }
  }
  return s;
}

SceneData load_scene(const std::filesystem::path& manifest_path, const PipelineConfig& cfg) {
  const auto m = SequenceManifest::read(manifest_path);
  if (m.grid != cfg.grid) throw std::invalid_argument("manifest grid differs from the config grid");
  if (m.trajectory.empty()) throw std::invalid_argument(manifest_path.string() + ": no trajectory entry");
  const auto rows = read_trajectory_csv(m.trajectory);
  if (m.labels.empty()) return make_scene_data(m.load_frames(), rows, m.global_bbox, cfg);
  const auto labels = read_labels_csv(m.labels);
  return make_scene_data(m.load_frames(), rows, m.global_bbox, cfg, &labels);
}

std::vector<std::size_t> test_frame_indices(const SceneData& scene, const PipelineConfig& cfg) {
  if (cfg.test_frames >= scene.frames.size()) throw std::invalid_argument("test_frames leaves no training frames");
  std::vector<std::size_t> out;
  for (std::size_t t = scene.frames.size() - cfg.test_frames; t < scene.frames.size(); ++t) out.push_back(t);
  return out;
}

TrainResult train_pipeline(const SceneData& scene, const PipelineConfig& cfg, std::size_t threads,
                           std::ostream* progress) {
  cfg.validate();
  const auto test = test_frame_indices(scene, cfg);
  const std::size_t train_end = scene.frames.size() - cfg.test_frames;
  if (train_end < 2) throw std::invalid_argument("training needs at least two frames");
  const auto sal = saliency_config(cfg);

  TrainResult result;
  result.params = init_pipeline_params(cfg);
  auto& store = result.params;

  // The trajectory model trains on its own objective before the main loop.
  bool lstm_trained = false;
  const auto seqs = user_sequences(scene, train_end);
  if (cfg.traj_steps > 0 && train_end > cfg.traj_window) {
    TrajectoryConfig tc;
    tc.hidden = cfg.traj_hidden;
    tc.window = cfg.traj_window;
    tc.steps = cfg.traj_steps;
    tc.lr = cfg.traj_lr;
    tc.seed = derive_seed(cfg.seed, {0x4C});
    auto tr = train_trajectory(seqs, tc);
    for (const auto& [name, value] : tr.params.values()) store.value(name) = value;
    result.trajectory_loss = tr.final_loss;
    lstm_trained = true;
  }
  const Predictor pred{scene, store, cfg, sal, predicted_states(scene, store, lstm_trained, cfg.traj_window)};

  std::vector<std::size_t> frames(scene.frames.size());
  std::iota(frames.begin(), frames.end(), 0);
  const auto cache = prepare_tiles(scene, frames, cfg, threads);

  struct Item {
    std::size_t frame, tile;
    ad::Tensor fl;
    std::vector<std::uint8_t> labels;
    std::array<double, 2> weights;
  };
  std::vector<Item> items;
  for (std::size_t t = 1; t < train_end; ++t) {
    for (std::size_t k = 0; k < cfg.tiles; ++k) {
      const auto& cur = cache[t][k];
      if (!cur.ok || !cache[t - 1][k].ok) {
        ++result.skipped_tiles;
        continue;
      }
      Item it{t, k, fl_inputs(cur, pred.predicted[fl_user(t, k, scene.users.size())][t], cfg.fov), {}, {}};
      for (const auto i : cur.indices) it.labels.push_back(scene.labels[t].labels[i]);
      it.weights = inverse_frequency_weights(it.labels);
      items.push_back(std::move(it));
    }
  }
  if (items.empty()) throw std::invalid_argument("no tile has enough points to sample in two consecutive frames");
  result.tile_pairs = items.size();

  ad::Adam adam(cfg.lr);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; result.steps < cfg.steps; ++epoch) {
    Rng shuffle(derive_seed(cfg.seed, {0x45, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size() && result.steps < cfg.steps; start += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, order.size() - start);
      std::vector<ad::GradMap> grads(b);
      std::vector<double> losses(b);
      parallel_for(b, threads, [&](std::size_t j) {
        const auto& it = items[order[start + j]];
        try {
          ad::Tape tape;
          Rng drop(derive_seed(cfg.seed, {0x44, result.steps, j}));
          const auto p = forward(tape, cache[it.frame][it.tile], cache[it.frame - 1][it.tile], it.fl, store, sal, true,
                                 drop, cfg.dropout);
          const auto loss = classification_loss(p, it.labels, it.weights);
          losses[j] = loss.value().item();
          grads[j] = tape.backward(loss);
        } catch (...) {
          rethrow_with_context(context(it.frame, it.tile));
        }
      });
      store.zero_grad();
      for (std::size_t j = 0; j < b; ++j) {
        for (auto& [name, g] : grads[j]) {
          for (auto& v : g.storage()) v /= static_cast<double>(b);
        }
        store.accumulate(grads[j]);
        loss_sum += losses[j];
        ++loss_count;
      }
      adam.step(store);
      ++result.steps;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.steps = result.steps;
    entry.loss = loss_sum / static_cast<double>(loss_count);
    if (!test.empty()) entry.eval = evaluate_frames(scene, pred, cache, test, threads, cfg.tau);
    if (progress) {
      *progress << "epoch " << epoch << " steps " << result.steps << " loss " << entry.loss;
      if (entry.eval) {
        *progress << " point_miou " << entry.eval->point.miou << " tile_miou "
                  << (entry.eval->tile_miou ? format_double(*entry.eval->tile_miou) : "NA");
      }
      *progress << '\n';
    }
    result.log.push_back(std::move(entry));
  }
  return result;
}

std::vector<FovLabels> predict_frames(const SceneData& scene, const ad::ParamStore& params, const PipelineConfig& cfg,
                                      std::span<const std::size_t> frames, std::size_t threads) {
  cfg.validate();
  for (const auto t : frames) {
    if (t >= scene.frames.size()) throw OutOfBoundsError("frame " + std::to_string(t) + " is not in the sequence");
  }
  const std::size_t history_end = scene.frames.size() - std::min(cfg.test_frames, scene.frames.size() - 1);
  const bool trained = cfg.traj_steps > 0 && history_end > cfg.traj_window;
  const Predictor pred{scene, params, cfg, saliency_config(cfg),
                       predicted_states(scene, params, trained, cfg.traj_window)};
  const auto cache = prepare_tiles(scene, with_previous(frames), cfg, threads);
  std::vector<FovLabels> out(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t j) { out[j] = pred.frame_labels(cache, frames[j]); });
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochLog> log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  out << "epoch,loss,point_miou,tile_miou,oa,precision,recall\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.loss);
    if (e.eval) {
      out << ',' << format_double(e.eval->point.miou) << ',' << opt(e.eval->tile_miou) << ','
          << format_double(e.eval->point.oa) << ',' << opt(e.eval->point.precision) << ','
          << opt(e.eval->point.recall) << '\n';
    } else {
      out << ",NA,NA,NA,NA,NA\n";
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace voxport
