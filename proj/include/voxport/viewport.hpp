#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxport/ad/ops.hpp"
#include "voxport/core.hpp"
#include "voxport/sampling.hpp"
#include "voxport/saliency.hpp"
#include "voxport/trajectory.hpp"

namespace voxport {

struct FovParams {
  double horizontal_half_deg = 55.0;
  double vertical_half_deg = 55.0;
  double near = 0.05;

  /// Throws std::invalid_argument unless both half-angles are in (0, 90) and near > 0.
  void validate() const;
  friend bool operator==(const FovParams&, const FovParams&) = default;
};

struct Frustum {
  Vec3 apex;
  Vec3 forward, right, up;
  FovParams fov;
};

/// R = Rz(gamma) Ry(beta) Rx(alpha), degrees, right-handed. forward = R(0,0,1),
/// right = R(1,0,0), up = R(0,1,0).
Frustum head_state_to_frustum(const HeadState& state, const FovParams& fov);

/// Angular frustum without a far plane. The angle boundaries are closed, with
/// 1e-9 degree slack for rounding.
bool in_fov(const Frustum& fr, Vec3 p);

struct FovLabels {
  std::size_t frame_index = 0;
  std::vector<std::uint8_t> labels;  // 1 = in FoV
  friend bool operator==(const FovLabels&, const FovLabels&) = default;
};

FovLabels classify_in_fov(const PointCloudFrame& frame, const Frustum& fr);

/// Per point, the number of users whose frustum contains it.
std::vector<int> fov_frequency(const PointCloudFrame& frame, std::span<const HeadState> users, const FovParams& fov);

/// Label 1 iff at least `freq_threshold` users see the point.
FovLabels build_ground_truth(const PointCloudFrame& frame, std::span<const HeadState> users, const FovParams& fov,
                             int freq_threshold = 5);

struct CoverageRow {
  int frequency = 0;
  double coverage_exact = 0.0;     // share of a viewport seen by exactly `frequency` users
  double coverage_at_least = 0.0;  // share seen by at least `frequency` users
};

/// For `sample_frames` random frames and 4 distinct random users per frame,
/// the share of each user's viewport by frequency class, averaged. Users with
/// an empty viewport are skipped. One row per frequency 1..U. Throws
/// std::invalid_argument with fewer than 4 users.
std::vector<CoverageRow> overlap_coverage(std::span<const PointCloudFrame> frames,
                                          const std::vector<std::vector<HeadState>>& users_per_frame,
                                          const FovParams& fov, std::size_t sample_frames, std::uint64_t seed);

/// White (255,255,255) for in-FoV sampled points, black otherwise. Throws
/// std::invalid_argument when a sampled index is outside the labels.
std::vector<Color> fov_colors(const SampledTile& sampled, const FovLabels& labels);

/// fl.fc (6 -> width) and fl.embed (width -> width).
void init_fl_params(ad::ParamStore& store, std::size_t width, Rng& rng);

/// Embeds point_inputs(positions, fov_colors) to the fusion width.
FeatureMap render_lstm_feature(ad::Tape& tape, const ad::Tensor& inputs, const ad::ParamStore& store);

/// CSV `frame,point_index,label`, one block per frame, indices 0..n-1 in order.
void write_labels_csv(const std::filesystem::path& path, std::span<const FovLabels> frames);
std::vector<FovLabels> read_labels_csv(const std::filesystem::path& path);

}  // namespace voxport
