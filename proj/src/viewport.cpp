#include "voxport/viewport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "voxport/ad/optim.hpp"
#include "voxport/csv.hpp"
#include "voxport/errors.hpp"

namespace voxport {
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
constexpr double kAngleSlackDeg = 1e-9;

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) m[i][j] += a[i][k] * b[k][j];
    }
  }
  return m;
}

Vec3 column(const Mat3& m, int j) { return {m[0][j], m[1][j], m[2][j]}; }

}  // namespace

void FovParams::validate() const {
  auto ok = [](double a) { return a > 0.0 && a < 90.0; };
  if (!ok(horizontal_half_deg) || !ok(vertical_half_deg)) {
    throw std::invalid_argument("FoV half-angles must lie in (0, 90) degrees");
  }
  if (!(near > 0.0)) throw std::invalid_argument("FoV near distance must be positive");
}

Frustum head_state_to_frustum(const HeadState& state, const FovParams& fov) {
  fov.validate();
  const double a = state.alpha * kDegToRad, b = state.beta * kDegToRad, g = state.gamma * kDegToRad;
  const Mat3 rx{{{1, 0, 0}, {0, std::cos(a), -std::sin(a)}, {0, std::sin(a), std::cos(a)}}};
  const Mat3 ry{{{std::cos(b), 0, std::sin(b)}, {0, 1, 0}, {-std::sin(b), 0, std::cos(b)}}};
  const Mat3 rz{{{std::cos(g), -std::sin(g), 0}, {std::sin(g), std::cos(g), 0}, {0, 0, 1}}};
  const Mat3 r = multiply(rz, multiply(ry, rx));
  return {state.position, column(r, 2), column(r, 0), column(r, 1), fov};
}

bool in_fov(const Frustum& fr, Vec3 p) {
  const Vec3 v = p - fr.apex;
  const double depth = dot(v, fr.forward);
  if (depth < fr.fov.near) return false;
  const double horizontal = std::abs(std::atan2(dot(v, fr.right), depth)) * kRadToDeg;
  const double vertical = std::abs(std::atan2(dot(v, fr.up), depth)) * kRadToDeg;
  return horizontal <= fr.fov.horizontal_half_deg + kAngleSlackDeg &&
         vertical <= fr.fov.vertical_half_deg + kAngleSlackDeg;
}

FovLabels classify_in_fov(const PointCloudFrame& frame, const Frustum& fr) {
  FovLabels out{frame.frame_index, std::vector<std::uint8_t>(frame.size())};
  for (std::size_t i = 0; i < frame.size(); ++i) out.labels[i] = in_fov(fr, frame.points[i].position) ? 1 : 0;
  return out;
}

std::vector<int> fov_frequency(const PointCloudFrame& frame, std::span<const HeadState> users, const FovParams& fov) {
  std::vector<int> freq(frame.size(), 0);
  for (const auto& u : users) {
    const auto fr = head_state_to_frustum(u, fov);
    for (std::size_t i = 0; i < frame.size(); ++i) freq[i] += in_fov(fr, frame.points[i].position) ? 1 : 0;
  }
  return freq;
}

FovLabels build_ground_truth(const PointCloudFrame& frame, std::span<const HeadState> users, const FovParams& fov,
                             int freq_threshold) {
  if (users.empty()) throw std::invalid_argument("ground truth needs at least one user");
  if (freq_threshold < 1) throw std::invalid_argument("frequency threshold must be at least 1");
  const auto freq = fov_frequency(frame, users, fov);
  FovLabels out{frame.frame_index, std::vector<std::uint8_t>(frame.size())};
  for (std::size_t i = 0; i < freq.size(); ++i) out.labels[i] = freq[i] >= freq_threshold ? 1 : 0;
  return out;
}

std::vector<CoverageRow> overlap_coverage(std::span<const PointCloudFrame> frames,
                                          const std::vector<std::vector<HeadState>>& users_per_frame,
                                          const FovParams& fov, std::size_t sample_frames, std::uint64_t seed) {
  if (frames.empty() || users_per_frame.size() != frames.size()) {
    throw std::invalid_argument("one user list per frame required");
  }
  const std::size_t users = users_per_frame.front().size();
  for (const auto& u : users_per_frame) {
    if (u.size() != users) throw std::invalid_argument("every frame needs the same users");
  }
  if (users < 4) throw std::invalid_argument("overlap coverage needs at least 4 users");

  Rng rng(seed);
  std::vector<double> exact(users + 1, 0.0), at_least(users + 1, 0.0);
  std::size_t viewports = 0;
  std::uniform_int_distribution<std::size_t> pick_frame(0, frames.size() - 1);
  for (std::size_t s = 0; s < sample_frames; ++s) {
    const std::size_t f = pick_frame(rng);
    const auto freq = fov_frequency(frames[f], users_per_frame[f], fov);
    std::vector<std::size_t> order(users);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto labels = classify_in_fov(frames[f], head_state_to_frustum(users_per_frame[f][order[k]], fov));
      std::vector<double> hist(users + 1, 0.0);
      double seen = 0.0;
      for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        if (!labels.labels[i]) continue;
        hist[static_cast<std::size_t>(freq[i])] += 1.0;
        seen += 1.0;
      }
      if (seen == 0.0) continue;
      ++viewports;
      double tail = 0.0;
      for (std::size_t q = users; q >= 1; --q) {
        tail += hist[q];
        exact[q] += hist[q] / seen;
        at_least[q] += tail / seen;
      }
    }
  }
  std::vector<CoverageRow> rows;
  for (std::size_t q = 1; q <= users; ++q) {
    const double n = viewports ? static_cast<double>(viewports) : 1.0;
    rows.push_back({static_cast<int>(q), exact[q] / n, at_least[q] / n});
  }
  return rows;
}

std::vector<Color> fov_colors(const SampledTile& sampled, const FovLabels& labels) {
  std::vector<Color> out;
  out.reserve(sampled.point_indices.size());
  for (auto i : sampled.point_indices) {
    if (i >= labels.labels.size()) {
      throw std::invalid_argument("sampled index " + std::to_string(i) + " outside labels of " +
                                  std::to_string(labels.labels.size()) + " points");
    }
    out.push_back(labels.labels[i] ? Color{255, 255, 255} : Color{0, 0, 0});
  }
  return out;
}

void init_fl_params(ad::ParamStore& store, std::size_t width, Rng& rng) {
  ad::add_dense_params(store, "fl.fc", 6, width, rng);
  ad::add_dense_params(store, "fl.embed", width, width, rng);
}

FeatureMap render_lstm_feature(ad::Tape& tape, const ad::Tensor& inputs, const ad::ParamStore& store) {
  const auto f0 = ad::dense(tape.constant(inputs), tape.param(store, "fl.fc.w"), tape.param(store, "fl.fc.b"));
  return {Branch::trajectory, ad::dense(f0, tape.param(store, "fl.embed.w"), tape.param(store, "fl.embed.b"),
                                        ad::Activation::leaky_relu)};
}

void write_labels_csv(const std::filesystem::path& path, std::span<const FovLabels> frames) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,point_index,label\n";
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < f.labels.size(); ++i) out << f.frame_index << ',' << i << ',' << int(f.labels[i]) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<FovLabels> read_labels_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, {"frame", "point_index", "label"});
  std::vector<FovLabels> frames;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto where = path.string() + ":" + std::to_string(r + 2);
    const auto frame = static_cast<std::size_t>(parse_csv_integer(table.rows[r][0], where, 0));
    const auto index = static_cast<std::size_t>(parse_csv_integer(table.rows[r][1], where, 0));
    const auto label = parse_csv_integer(table.rows[r][2], where, 0);
    if (label > 1) throw ParseError(where + ": label must be 0 or 1");
    if (frames.empty() || frames.back().frame_index != frame) {
      for (const auto& f : frames) {
        if (f.frame_index == frame) throw ParseError(where + ": frame " + std::to_string(frame) + " split in two blocks");
      }
      frames.push_back({frame, {}});
    }
    if (index != frames.back().labels.size()) {
      throw ParseError(where + ": expected point_index " + std::to_string(frames.back().labels.size()));
    }
    frames.back().labels.push_back(static_cast<std::uint8_t>(label));
  }
  return frames;
}

}  // namespace voxport
