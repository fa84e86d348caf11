#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "voxport/ad/ops.hpp"
#include "voxport/core.hpp"

namespace voxport {

/// Head pose: position plus Euler angles in degrees (see head_state_to_frustum).
struct HeadState {
  Vec3 position;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;

  std::array<double, 6> to_array() const { return {position.x, position.y, position.z, alpha, beta, gamma}; }
  static HeadState from_array(const std::array<double, 6>& v) { return {{v[0], v[1], v[2]}, v[3], v[4], v[5]}; }
  friend bool operator==(const HeadState&, const HeadState&) = default;
};

/// Maps degrees into (-180, 180].
double normalize_angle(double degrees);
HeadState normalize_angles(HeadState s);

/// Per-dimension z-score over one history. Angles are unwrapped along the
/// history first, so a target is scored by its wrapped difference to the
/// history. Standard deviations are floored at sqrt(1e-6).
class Normalizer {
 public:
  static constexpr double kVarianceFloor = 1e-6;

  static Normalizer fit(std::span<const HeadState> history);
  /// Unwrapped, normalized history rows.
  std::vector<std::array<double, 6>> apply(std::span<const HeadState> history) const;
  /// Normalized target, angles unwrapped relative to the history's last state.
  std::array<double, 6> apply_target(const HeadState& target) const;
  HeadState invert(const std::array<double, 6>& z) const;

  const std::array<double, 6>& mean() const { return mean_; }
  const std::array<double, 6>& scale() const { return scale_; }

 private:
  std::array<double, 6> mean_{}, scale_{};
  std::array<double, 3> last_angles_{};  // unwrapped angles of the last history state
};

struct TrajectoryConfig {
  std::size_t hidden = 64;
  std::size_t window = 16;
  std::size_t steps = 2000;  // Adam updates
  std::size_t batch = 32;    // windows per update
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

/// lstm.{f,i,o,c}.w [H + 6, H], lstm.{f,i,o,c}.b [H], lstm.readout.{w,b} [H -> 6].
void init_lstm_params(ad::ParamStore& store, std::size_t hidden, Rng& rng);

struct LstmState {
  ad::Var h;  // [B, H]
  ad::Var c;  // [B, H]
};

/// One step for a batch of B rows of normalized 6-vectors.
LstmState lstm_cell(ad::Tape& tape, const LstmState& state, const ad::Var& input, const ad::ParamStore& store);
LstmState lstm_zero_state(ad::Tape& tape, std::size_t batch, std::size_t hidden);

/// Runs the cell over the normalized history and de-normalizes the readout.
/// Throws std::invalid_argument on an empty history.
HeadState predict_head_state(std::span<const HeadState> history, const ad::ParamStore& store);

struct TrajectoryTrainResult {
  ad::ParamStore params;
  double initial_loss = 0.0;  // full-set loss before the first update
  double final_loss = 0.0;    // full-set loss after the last update
};

/// Sliding windows (window inputs -> next state) over every sequence, MSE on
/// normalized 6-vectors, Adam. Sequences no longer than the window are
/// skipped; throws std::invalid_argument when none remain.
TrajectoryTrainResult train_trajectory(const std::vector<std::vector<HeadState>>& sequences,
                                       const TrajectoryConfig& cfg);

/// Mean normalized squared error of one-step predictions over all windows.
double trajectory_loss(const std::vector<std::vector<HeadState>>& sequences, std::size_t window,
                       const ad::ParamStore& store);

struct TrajectoryRow {
  std::size_t frame = 0;
  int user = 0;
  HeadState state;
  friend bool operator==(const TrajectoryRow&, const TrajectoryRow&) = default;
};

/// CSV with header `frame,user,X,Y,Z,alpha,beta,gamma`.
std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path);
void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryRow> rows);

/// user -> states ordered by frame.
std::map<int, std::vector<std::pair<std::size_t, HeadState>>> group_by_user(std::span<const TrajectoryRow> rows);

}  // namespace voxport
