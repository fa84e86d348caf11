#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "voxport/ad/tensor.hpp"
#include "voxport/config.hpp"
#include "voxport/eval.hpp"
#include "voxport/saliency.hpp"
#include "voxport/trajectory.hpp"
#include "voxport/viewport.hpp"

namespace voxport {

/// One sequence with everything training and evaluation need.
struct SceneData {
  std::vector<PointCloudFrame> frames;
  std::vector<TiledFrame> tilings;
  std::vector<FovLabels> labels;               // ground truth per frame
  std::vector<std::vector<HeadState>> users;   // users[u][t]
};

/// Every user needs a state at every frame. Ground truth is computed from the
/// trajectories unless `labels` is given.
SceneData make_scene_data(std::vector<PointCloudFrame> frames, std::span<const TrajectoryRow> trajectories,
                          const Box& bbox, const PipelineConfig& cfg, const std::vector<FovLabels>* labels = nullptr);

/// Reads a sequence manifest (frames, trajectory, optional labels).
SceneData load_scene(const std::filesystem::path& manifest, const PipelineConfig& cfg);

SaliencyConfig saliency_config(const PipelineConfig& cfg);

/// Saliency, F_L, fusion and LSTM parameters, freshly initialized from cfg.seed.
ad::ParamStore init_pipeline_params(const PipelineConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps so far
  double loss = 0.0;      // mean training loss over the epoch's tile pairs
  std::optional<EvalReport> eval;  // on the held-out frames; empty without any
};

struct TrainResult {
  ad::ParamStore params;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
  std::size_t tile_pairs = 0;
  std::size_t skipped_tiles = 0;  // tiles with fewer than N points in either frame
  double trajectory_loss = 0.0;
};

/// Frames [0, size - test_frames) train, the rest are held out. Tile pairs
/// (t-1, t) run on independent tapes across `threads` workers; gradients are
/// averaged in tile-pair order before a single Adam step. Stops after
/// cfg.steps steps. `progress` may be null.
TrainResult train_pipeline(const SceneData& scene, const PipelineConfig& cfg, std::size_t threads,
                           std::ostream* progress = nullptr);

/// Labels for whole frames: each sampled tile is classified and every tile
/// point takes the label of its nearest sampled point. Tiles too small to
/// sample are labelled 0.
std::vector<FovLabels> predict_frames(const SceneData& scene, const ad::ParamStore& params, const PipelineConfig& cfg,
                                      std::span<const std::size_t> frames, std::size_t threads);

/// Held-out frame indices for `scene`.
std::vector<std::size_t> test_frame_indices(const SceneData& scene, const PipelineConfig& cfg);

/// `epoch,loss,point_miou,tile_miou,oa,precision,recall`, NA for absent values.
void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochLog> log);

}  // namespace voxport
