#include "voxport/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "voxport/ad/optim.hpp"
#include "voxport/csv.hpp"
#include "voxport/errors.hpp"

namespace voxport {

using ad::Activation;
using ad::Tape;
using ad::Tensor;
using ad::Var;

double normalize_angle(double degrees) {
  double a = std::fmod(degrees, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

HeadState normalize_angles(HeadState s) {
  s.alpha = normalize_angle(s.alpha);
  s.beta = normalize_angle(s.beta);
  s.gamma = normalize_angle(s.gamma);
  return s;
}

namespace {

std::vector<std::array<double, 6>> unwrap(std::span<const HeadState> history) {
  std::vector<std::array<double, 6>> out;
  out.reserve(history.size());
  for (const auto& s : history) {
    auto v = s.to_array();
    if (!out.empty()) {
      for (int a = 3; a < 6; ++a) v[a] = out.back()[a] + normalize_angle(v[a] - out.back()[a]);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

Normalizer Normalizer::fit(std::span<const HeadState> history) {
  if (history.empty()) throw std::invalid_argument("cannot normalize an empty history");
  const auto rows = unwrap(history);
  Normalizer n;
  const double count = static_cast<double>(rows.size());
  for (int d = 0; d < 6; ++d) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[d];
    mean /= count;
    double var = 0.0;
    for (const auto& r : rows) var += (r[d] - mean) * (r[d] - mean);
    var /= count;
    n.mean_[d] = mean;
    n.scale_[d] = std::sqrt(std::max(var, kVarianceFloor));
  }
  for (int a = 0; a < 3; ++a) n.last_angles_[a] = rows.back()[3 + a];
  return n;
}

std::vector<std::array<double, 6>> Normalizer::apply(std::span<const HeadState> history) const {
  auto rows = unwrap(history);
  for (auto& r : rows) {
    for (int d = 0; d < 6; ++d) r[d] = (r[d] - mean_[d]) / scale_[d];
  }
  return rows;
}

std::array<double, 6> Normalizer::apply_target(const HeadState& target) const {
  auto v = target.to_array();
  for (int a = 0; a < 3; ++a) v[3 + a] = last_angles_[a] + normalize_angle(v[3 + a] - last_angles_[a]);
  for (int d = 0; d < 6; ++d) v[d] = (v[d] - mean_[d]) / scale_[d];
  return v;
}

HeadState Normalizer::invert(const std::array<double, 6>& z) const {
  std::array<double, 6> v{};
  for (int d = 0; d < 6; ++d) v[d] = z[d] * scale_[d] + mean_[d];
  return normalize_angles(HeadState::from_array(v));
}

void init_lstm_params(ad::ParamStore& store, std::size_t hidden, Rng& rng) {
  for (const char* gate : {"f", "i", "o", "c"}) {
    ad::add_dense_params(store, std::string("lstm.") + gate, hidden + 6, hidden, rng);
  }
  ad::add_dense_params(store, "lstm.readout", hidden, 6, rng);
}

LstmState lstm_zero_state(Tape& tape, std::size_t batch, std::size_t hidden) {
  return {tape.constant(Tensor({batch, hidden})), tape.constant(Tensor({batch, hidden}))};
}

LstmState lstm_cell(Tape& tape, const LstmState& state, const Var& input, const ad::ParamStore& store) {
  if (input.value().cols() != 6 || input.value().rows() != state.h.value().rows()) {
    throw ShapeError("lstm input " + ad::to_string(input.shape()) + " does not match state " +
                     ad::to_string(state.h.shape()));
  }
  const Var hx = ad::concat({state.h, input});
  auto gate = [&](const char* g, Activation act) {
    const std::string p = std::string("lstm.") + g;
    return ad::dense(hx, tape.param(store, p + ".w"), tape.param(store, p + ".b"), act);
  };
  const Var f = gate("f", Activation::sigmoid);
  const Var i = gate("i", Activation::sigmoid);
  const Var o = gate("o", Activation::sigmoid);
  const Var candidate = gate("c", Activation::tanh);
  const Var c = ad::add(ad::mul(f, state.c), ad::mul(i, candidate));
  return {ad::mul(o, ad::activate(c, Activation::tanh)), c};
}

namespace {

std::size_t hidden_width(const ad::ParamStore& store) { return store.value("lstm.f.b").size(); }

// Steps [window][rows, 6] and targets [rows, 6] in normalized units.
struct WindowSet {
  std::vector<Tensor> steps;
  Tensor targets;
  std::size_t count = 0;
};

WindowSet build_windows(const std::vector<std::vector<HeadState>>& sequences, std::size_t window) {
  std::vector<std::array<double, 6>> flat_inputs, flat_targets;
  for (const auto& seq : sequences) {
    if (seq.size() <= window) continue;
    for (std::size_t start = 0; start + window < seq.size(); ++start) {
      const std::span<const HeadState> hist(seq.data() + start, window);
      const auto norm = Normalizer::fit(hist);
      const auto rows = norm.apply(hist);
      flat_inputs.insert(flat_inputs.end(), rows.begin(), rows.end());
      flat_targets.push_back(norm.apply_target(seq[start + window]));
    }
  }
  WindowSet set;
  set.count = flat_targets.size();
  set.targets = Tensor({set.count, 6});
  for (std::size_t w = 0; w < set.count; ++w) std::copy_n(flat_targets[w].data(), 6, set.targets.data() + w * 6);
  for (std::size_t t = 0; t < window; ++t) {
    Tensor step({set.count, 6});
    for (std::size_t w = 0; w < set.count; ++w) std::copy_n(flat_inputs[w * window + t].data(), 6, step.data() + w * 6);
    set.steps.push_back(std::move(step));
  }
  return set;
}

Tensor gather(const Tensor& src, std::span<const std::size_t> rows) {
  Tensor out({rows.size(), src.cols()});
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(src.data() + rows[r] * src.cols(), src.cols(), out.data() + r * src.cols());
  return out;
}

Var run_sequence(Tape& tape, const std::vector<Tensor>& steps, const ad::ParamStore& store) {
  const std::size_t rows = steps.front().rows();
  LstmState state = lstm_zero_state(tape, rows, hidden_width(store));
  for (const auto& x : steps) state = lstm_cell(tape, state, tape.constant(x), store);
  return ad::dense(state.h, tape.param(store, "lstm.readout.w"), tape.param(store, "lstm.readout.b"));
}

double window_loss(const WindowSet& set, const ad::ParamStore& store) {
  Tape tape(false);
  const Var pred = run_sequence(tape, set.steps, store);
  return ad::mse(pred, tape.constant(set.targets)).value().item();
}

}  // namespace

HeadState predict_head_state(std::span<const HeadState> history, const ad::ParamStore& store) {
  if (history.empty()) throw std::invalid_argument("head-state prediction needs a non-empty history");
  const auto norm = Normalizer::fit(history);
  const auto rows = norm.apply(history);
  std::vector<Tensor> steps;
  for (const auto& r : rows) steps.emplace_back(ad::Shape{1, 6}, std::vector<double>(r.begin(), r.end()));
  Tape tape(false);
  const Tensor out = run_sequence(tape, steps, store).value();
  std::array<double, 6> z{};
  std::copy_n(out.data(), 6, z.begin());
  return norm.invert(z);
}

double trajectory_loss(const std::vector<std::vector<HeadState>>& sequences, std::size_t window,
                       const ad::ParamStore& store) {
  const auto set = build_windows(sequences, window);
  if (set.count == 0) throw std::invalid_argument("no sequence is longer than the window");
  return window_loss(set, store);
}

TrajectoryTrainResult train_trajectory(const std::vector<std::vector<HeadState>>& sequences,
                                       const TrajectoryConfig& cfg) {
  if (cfg.window == 0) throw std::invalid_argument("trajectory window must be positive");
  const auto set = build_windows(sequences, cfg.window);
  if (set.count == 0) throw std::invalid_argument("no sequence is longer than the window");

  TrajectoryTrainResult result;
  Rng rng(cfg.seed);
  init_lstm_params(result.params, cfg.hidden, rng);
  result.initial_loss = window_loss(set, result.params);

  ad::Adam adam(cfg.lr);
  const std::size_t batch = std::min(cfg.batch, set.count);
  std::vector<std::size_t> order(set.count);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = set.count;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> rows;
    while (rows.size() < batch) {
      if (cursor == set.count) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    std::vector<Tensor> steps;
    for (const auto& s : set.steps) steps.push_back(gather(s, rows));
    Tape tape;
    const Var loss = ad::mse(run_sequence(tape, steps, result.params), tape.constant(gather(set.targets, rows)));
    result.params.zero_grad();
    ad::backward(tape, loss, result.params);
    adam.step(result.params);
  }
  result.final_loss = window_loss(set, result.params);
  return result;
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path, {"frame", "user", "X", "Y", "Z", "alpha", "beta", "gamma"});
  std::vector<TrajectoryRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const auto where = path.string() + ":" + std::to_string(r + 2);
    TrajectoryRow row;
    row.frame = static_cast<std::size_t>(parse_csv_integer(f[0], where, 0));
    row.user = static_cast<int>(parse_csv_integer(f[1], where, 0));
    row.state = {{parse_csv_double(f[2], where), parse_csv_double(f[3], where), parse_csv_double(f[4], where)},
                 parse_csv_double(f[5], where),
                 parse_csv_double(f[6], where),
                 parse_csv_double(f[7], where)};
    rows.push_back(row);
  }
  return rows;
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,user,X,Y,Z,alpha,beta,gamma\n";
  for (const auto& r : rows) {
    out << r.frame << ',' << r.user;
    for (double v : r.state.to_array()) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::map<int, std::vector<std::pair<std::size_t, HeadState>>> group_by_user(std::span<const TrajectoryRow> rows) {
  std::map<int, std::vector<std::pair<std::size_t, HeadState>>> out;
  for (const auto& r : rows) out[r.user].emplace_back(r.frame, r.state);
  for (auto& [user, seq] : out) {
    std::stable_sort(seq.begin(), seq.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  return out;
}

}  // namespace voxport
