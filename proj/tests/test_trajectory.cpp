#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "voxport/ad/gradcheck.hpp"
#include "voxport/errors.hpp"
#include "voxport/trajectory.hpp"

using namespace voxport;
using namespace voxport::ad;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<HeadState> circle(double offset, std::size_t n) {
  std::vector<HeadState> s;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2 * M_PI * (double(i) + offset) / 64.0;
    HeadState h;
    h.position = {std::cos(th), 1.6, std::sin(th)};
    h.beta = normalize_angle(std::atan2(-std::cos(th), -std::sin(th)) * 180 / M_PI);
    s.push_back(h);
  }
  return s;
}

ParamStore random_lstm(std::size_t hidden, std::uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  init_lstm_params(store, hidden, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (const auto& name : store.names()) {
    for (auto& v : store.value(name).storage()) v = u(rng);
  }
  return store;
}

}  // namespace

TEST_SUITE("trajectory") {
  TEST_CASE("angle normalization") {
    CHECK(normalize_angle(180.0) == 180.0);
    CHECK(normalize_angle(-180.0) == 180.0);
    CHECK(normalize_angle(540.0) == 180.0);
    CHECK(normalize_angle(190.0) == -170.0);
    CHECK(normalize_angle(-190.0) == 170.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2000, 2000);
    for (int i = 0; i < 1000; ++i) {
      const double a = normalize_angle(u(rng));
      CHECK(a > -180.0);
      CHECK(a <= 180.0);
      CHECK(normalize_angle(a) == a);
    }
  }

  TEST_CASE("zero parameters give half-open gates and a zero state") {
    ParamStore store;
    Rng rng(1);
    init_lstm_params(store, 4, rng);
    for (const auto& name : store.names()) store.value(name).fill(0.0);
    Tape tape(false);
    Tensor x({1, 6}, std::vector<double>{1, 2, 3, 4, 5, 6});
    const auto s = lstm_cell(tape, lstm_zero_state(tape, 1, 4), tape.constant(x), store);
    for (double v : s.c.value().values()) CHECK(v == 0.0);
    for (double v : s.h.value().values()) CHECK(v == 0.0);
  }

  TEST_CASE("saturated gates keep the cell") {
    auto store = random_lstm(3, 2);
    store.value("lstm.f.b").fill(60.0);
    store.value("lstm.i.b").fill(-60.0);
    Tape tape(false);
    const LstmState s{tape.constant(Tensor({1, 3}, 0.1)), tape.constant(Tensor({1, 3}, std::vector<double>{0.3, -0.7, 1.2}))};
    const auto next = lstm_cell(tape, s, tape.constant(Tensor({1, 6}, 0.2)), store);
    for (std::size_t i = 0; i < 3; ++i) CHECK(next.c.value()[i] == doctest::Approx(s.c.value()[i]).epsilon(1e-12));
  }

  TEST_CASE("cell matches the per-gate formulas") {
    const std::size_t H = 5;
    auto store = random_lstm(H, 3);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor h({2, H}), c({2, H}), x({2, 6});
    for (auto* t : {&h, &c, &x}) {
      for (auto& v : t->storage()) v = u(rng);
    }
    Tape tape(false);
    const auto out = lstm_cell(tape, {tape.constant(h), tape.constant(c)}, tape.constant(x), store);
    for (std::size_t r = 0; r < 2; ++r) {
      std::vector<double> hx;
      for (std::size_t j = 0; j < H; ++j) hx.push_back(h.at(r, j));
      for (std::size_t j = 0; j < 6; ++j) hx.push_back(x.at(r, j));
      auto pre = [&](const char* g, std::size_t col) {
        const auto& w = store.value(std::string("lstm.") + g + ".w");
        double acc = store.value(std::string("lstm.") + g + ".b")[col];
        for (std::size_t k = 0; k < H + 6; ++k) acc += hx[k] * w.at(k, col);
        return acc;
      };
      for (std::size_t j = 0; j < H; ++j) {
        const double cn = sigmoid(pre("f", j)) * c.at(r, j) + sigmoid(pre("i", j)) * std::tanh(pre("c", j));
        const double hn = sigmoid(pre("o", j)) * std::tanh(cn);
        CHECK(std::abs(out.c.value().at(r, j) - cn) < 1e-12);
        CHECK(std::abs(out.h.value().at(r, j) - hn) < 1e-12);
        const double f = sigmoid(pre("f", j));
        CHECK(f > 0.0);
        CHECK(f < 1.0);
      }
    }
    CHECK_THROWS_AS(lstm_cell(tape, {tape.constant(h), tape.constant(c)}, tape.constant(Tensor({2, 5})), store),
                    ShapeError);
  }

  TEST_CASE("unrolled gradient check") {
    auto store = random_lstm(6, 5);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0, 1);
    std::vector<Tensor> xs;
    for (int t = 0; t < 4; ++t) {
      Tensor x({3, 6});
      for (auto& v : x.storage()) v = g(rng);
      xs.push_back(x);
    }
    Tensor target({3, 6});
    for (auto& v : target.storage()) v = g(rng);
    const auto r = grad_check(
        [&](Tape& t) {
          auto s = lstm_zero_state(t, 3, 6);
          for (const auto& x : xs) s = lstm_cell(t, s, t.constant(x), store);
          const auto y = dense(s.h, t.param(store, "lstm.readout.w"), t.param(store, "lstm.readout.b"));
          return mse(y, t.constant(target));
        },
        store, 1e-5, 1.0, 2);
    CHECK(r.max_relative_error < 1e-4);
  }

  TEST_CASE("zero readout predicts the normalization mean") {
    auto store = random_lstm(4, 7);
    store.value("lstm.readout.w").fill(0.0);
    store.value("lstm.readout.b").fill(0.0);
    const auto hist = circle(0.3, 10);
    const auto mean = Normalizer::fit(hist).mean();
    const auto p = predict_head_state(hist, store);
    CHECK(p.position.x == doctest::Approx(mean[0]).epsilon(1e-12));
    CHECK(p.position.z == doctest::Approx(mean[2]).epsilon(1e-12));
    CHECK(p.beta == doctest::Approx(normalize_angle(mean[4])).epsilon(1e-12));
    CHECK_THROWS_AS(predict_head_state({}, store), std::invalid_argument);
  }

  TEST_CASE("normalizer unwraps angles across the seam") {
    std::vector<HeadState> hist(3);
    hist[0].beta = 170;
    hist[1].beta = 178;
    hist[2].beta = -174;  // 186 unwrapped
    const auto n = Normalizer::fit(hist);
    CHECK(n.mean()[4] == doctest::Approx(178.0));
    HeadState next;
    next.beta = -166;  // 194 unwrapped
    const auto z = n.apply_target(next);
    CHECK(z[4] * n.scale()[4] + n.mean()[4] == doctest::Approx(194.0));
    CHECK(n.invert(z).beta == doctest::Approx(-166.0));
  }

  TEST_CASE("constant sequences are learned") {
    HeadState s{{0.5, 1.7, -2.0}, 10.0, -35.0, 3.0};
    std::vector<std::vector<HeadState>> data{std::vector<HeadState>(40, s)};
    TrajectoryConfig cfg;
    cfg.hidden = 16;
    cfg.window = 8;
    cfg.steps = 200;
    const auto r = train_trajectory(data, cfg);
    const auto p = predict_head_state(std::vector<HeadState>(8, s), r.params);
    for (int d = 0; d < 6; ++d) CHECK(std::abs(p.to_array()[d] - s.to_array()[d]) < 1e-3);
  }

  TEST_CASE("a single sequence is memorized and training is deterministic") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0, 1);
    std::vector<HeadState> seq;
    HeadState cur;
    for (int i = 0; i < 20; ++i) {
      cur.position = cur.position + Vec3{0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng)};
      cur.beta = normalize_angle(cur.beta + 5 * g(rng));
      seq.push_back(cur);
    }
    TrajectoryConfig cfg;
    cfg.hidden = 32;
    cfg.window = 16;
    cfg.steps = 500;
    const auto a = train_trajectory({seq}, cfg);
    CHECK(a.final_loss < a.initial_loss);
    CHECK(a.final_loss < 1e-4);
    const auto b = train_trajectory({seq}, cfg);
    CHECK(a.params.values() == b.params.values());
    CHECK_THROWS_AS(train_trajectory({std::vector<HeadState>(16)}, cfg), std::invalid_argument);
  }

  TEST_CASE("circular trajectory, held-out phases") {
    std::vector<std::vector<HeadState>> train;
    for (int j = 0; j < 4; ++j) train.push_back(circle(j / 4.0, 128));
    TrajectoryConfig cfg;
    cfg.steps = 600;
    const auto r = train_trajectory(train, cfg);
    double worst = 0;
    for (double off : {0.1, 0.37, 0.61, 0.88}) {
      const auto seq = circle(off, 80);
      for (std::size_t s = 0; s + 16 < seq.size(); ++s) {
        const auto p = predict_head_state(std::span(seq).subspan(s, 16), r.params);
        worst = std::max(worst, std::sqrt(squared_distance(p.position, seq[s + 16].position)));
        CHECK(p.beta > -180.0);
        CHECK(p.beta <= 180.0);
      }
    }
    CHECK(worst < 0.05);
  }

  TEST_CASE("trajectory CSV") {
    const auto dir = std::filesystem::temp_directory_path() / "voxport_test_traj";
    std::filesystem::create_directories(dir);
    std::vector<TrajectoryRow> rows{{0, 1, {{0.1, 0.2, 0.3}, 1.5, -2.25, 179.0}}, {1, 0, {{1e-9, -3, 7}, 0, 0, 0}}};
    write_trajectory_csv(dir / "t.csv", rows);
    CHECK(read_trajectory_csv(dir / "t.csv") == rows);
    const auto users = group_by_user(rows);
    CHECK(users.size() == 2);
    CHECK(users.at(1).front().first == 0);
    std::ofstream(dir / "bad.csv") << "frame,user,X\n0,0,1\n";
    CHECK_THROWS_AS(read_trajectory_csv(dir / "bad.csv"), ParseError);
    std::ofstream(dir / "bad2.csv") << "frame,user,X,Y,Z,alpha,beta,gamma\n0,0,1,2,x,0,0,0\n";
    CHECK_THROWS_AS(read_trajectory_csv(dir / "bad2.csv"), ParseError);
  }
}
