#include <doctest.h>

#include <cmath>
#include <random>

#include "voxport/ad/gradcheck.hpp"
#include "voxport/errors.hpp"
#include "voxport/fusion.hpp"
#include "voxport/viewport.hpp"

using namespace voxport;
using namespace voxport::ad;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(s));
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

void randomize(ParamStore& store, Rng& rng) {
  for (const auto& name : store.names()) {
    for (auto& v : store.value(name).storage()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  }
}

// Direct evaluation of softmax(x W + b) per row.
Tensor naive_mask(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor m({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(d);
    double zmax = -1e300;
    for (std::size_t j = 0; j < d; ++j) {
      z[j] = b[j];
      for (std::size_t k = 0; k < d; ++k) z[j] += x.at(i, k) * w.at(k, j);
      zmax = std::max(zmax, z[j]);
    }
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(z[j] - zmax);
    for (std::size_t j = 0; j < d; ++j) m.at(i, j) = std::exp(z[j] - zmax) / s;
  }
  return m;
}

Tensor naive_dense(const Tensor& x, const Tensor& w, const Tensor& b, bool relu) {
  Tensor y({x.dim(0), w.dim(1)});
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    for (std::size_t j = 0; j < w.dim(1); ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < w.dim(0); ++k) s += x.at(i, k) * w.at(k, j);
      y.at(i, j) = relu ? std::max(0.0, s) : s;
    }
  }
  return y;
}

}  // namespace

TEST_SUITE("fusion") {
  TEST_CASE("attention fuse against direct evaluation") {
    Rng rng(1);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    randomize(store, rng);
    Tape tape;
    const Tensor a = random_tensor({20, 8}, rng), b = random_tensor({20, 8}, rng);
    const auto r = attention_fuse(tape, {Branch::spatial, tape.constant(a)}, {Branch::temporal, tape.constant(b)}, store,
                                  "fuse.w1", "fuse.w2", Branch::fused_saliency);
    const Tensor ma = naive_mask(a, store.value("fuse.w1.w"), store.value("fuse.w1.b"));
    const Tensor mb = naive_mask(b, store.value("fuse.w2.w"), store.value("fuse.w2.b"));
    CHECK(r.fused.branch == Branch::fused_saliency);
    for (std::size_t i = 0; i < 20; ++i) {
      double sa = 0, sb = 0;
      for (std::size_t j = 0; j < 8; ++j) {
        sa += r.mask_a.value().at(i, j);
        sb += r.mask_b.value().at(i, j);
        const double expect = ma.at(i, j) * a.at(i, j) + mb.at(i, j) * b.at(i, j);
        CHECK(std::abs(r.fused.features.value().at(i, j) - expect) < 1e-12);
      }
      CHECK(std::abs(sa - 1.0) < 1e-9);
      CHECK(std::abs(sb - 1.0) < 1e-9);
    }
  }

  TEST_CASE("attention fuse symmetry") {
    Rng rng(2);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    randomize(store, rng);
    Tape tape;
    const auto a = tape.constant(random_tensor({10, 8}, rng)), b = tape.constant(random_tensor({10, 8}, rng));
    const auto ab = attention_fuse(tape, {Branch::spatial, a}, {Branch::temporal, b}, store, "fuse.w1", "fuse.w2",
                                   Branch::fused_saliency);
    const auto ba = attention_fuse(tape, {Branch::temporal, b}, {Branch::spatial, a}, store, "fuse.w2", "fuse.w1",
                                   Branch::fused_saliency);
    for (std::size_t i = 0; i < ab.fused.features.value().size(); ++i) {
      CHECK(std::abs(ab.fused.features.value()[i] - ba.fused.features.value()[i]) < 1e-15);
    }
    const auto aa = attention_fuse(tape, {Branch::spatial, a}, {Branch::spatial, a}, store, "fuse.w1", "fuse.w1",
                                   Branch::fused_saliency);
    for (std::size_t i = 0; i < aa.fused.features.value().size(); ++i) {
      CHECK(aa.fused.features.value()[i] == doctest::Approx(2.0 * aa.mask_a.value()[i] * a.value()[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("zero fusion weights average the branches") {
    Rng rng(3);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    for (const char* n : {"fuse.w1.w", "fuse.w1.b", "fuse.w2.w", "fuse.w2.b"}) store.value(n).fill(0.0);
    Tape tape;
    const Tensor a = random_tensor({6, 8}, rng), b = random_tensor({6, 8}, rng);
    const auto r = attention_fuse(tape, {Branch::spatial, tape.constant(a)}, {Branch::temporal, tape.constant(b)}, store,
                                  "fuse.w1", "fuse.w2", Branch::fused_saliency);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(r.fused.features.value()[i] == doctest::Approx((a[i] + b[i]) / 8.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(attention_fuse(tape, {Branch::spatial, tape.constant(a)},
                                   {Branch::temporal, tape.constant(Tensor({5, 8}))}, store, "fuse.w1", "fuse.w2",
                                   Branch::fused_saliency),
                    ShapeError);
  }

  TEST_CASE("head against a layer-by-layer evaluation") {
    Rng rng(4);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    randomize(store, rng);
    const Tensor x = random_tensor({30, 8}, rng);
    Tape tape(false);
    Rng drop(0);
    const auto p = classify(tape, {Branch::fused, tape.constant(x)}, store, false, drop);
    const Tensor h1 = naive_dense(x, store.value("head.fc1.w"), store.value("head.fc1.b"), true);
    const Tensor h2 = naive_dense(h1, store.value("head.fc2.w"), store.value("head.fc2.b"), true);
    const Tensor z = naive_dense(h2, store.value("head.fc3.w"), store.value("head.fc3.b"), false);
    CHECK(h1.dim(1) == 64);
    CHECK(h2.dim(1) == 32);
    CHECK(p.logits.shape() == Shape{30, 2});
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(std::abs(p.logits.value().at(i, 0) - z.at(i, 0)) < 1e-12);
      CHECK(std::abs(p.logits.value().at(i, 1) - z.at(i, 1)) < 1e-12);
      const double p1 = 1.0 / (1.0 + std::exp(z.at(i, 0) - z.at(i, 1)));
      CHECK(std::abs(p.probabilities.at(i, 1) - p1) < 1e-12);
      CHECK(std::abs(p.probabilities.at(i, 0) + p.probabilities.at(i, 1) - 1.0) < 1e-9);
      CHECK(p.labels[i] == (z.at(i, 1) > z.at(i, 0) ? 1 : 0));
    }
    Rng drop2(99);
    const auto again = classify(tape, {Branch::fused, tape.constant(x)}, store, false, drop2);
    CHECK(again.probabilities == p.probabilities);
  }

  TEST_CASE("equal logits tie to class 0") {
    Rng rng(5);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    store.value("head.fc3.w").fill(0.0);
    store.value("head.fc3.b").fill(0.3);
    Tape tape;
    const auto p = classify(tape, {Branch::fused, tape.constant(random_tensor({4, 8}, rng))}, store, false, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(p.probabilities.at(i, 0) == 0.5);
      CHECK(p.probabilities.at(i, 1) == 0.5);
      CHECK(p.labels[i] == 0);
    }
  }

  TEST_CASE("training dropout is seeded") {
    Rng rng(6);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    const Tensor x = random_tensor({40, 8}, rng);
    Tape tape;
    Rng d1(7), d2(7), d3(8);
    const auto a = classify(tape, {Branch::fused, tape.constant(x)}, store, true, d1);
    const auto b = classify(tape, {Branch::fused, tape.constant(x)}, store, true, d2);
    const auto c = classify(tape, {Branch::fused, tape.constant(x)}, store, true, d3);
    const auto off = classify(tape, {Branch::fused, tape.constant(x)}, store, false, d3);
    CHECK(a.logits.value() == b.logits.value());
    CHECK(a.logits.value() != c.logits.value());
    CHECK(a.logits.value() != off.logits.value());
  }

  TEST_CASE("loss values") {
    Tape tape;
    Prediction p;
    Tensor z({4, 2});
    const std::vector<std::uint8_t> gt{1, 0, 0, 1};
    for (std::size_t i = 0; i < 4; ++i) z.at(i, gt[i]) = 40.0;
    p.logits = tape.constant(z);
    p.labels = gt;
    const auto w = inverse_frequency_weights(gt);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 1.0);
    CHECK(classification_loss(p, gt, w).value().item() < 1e-9);
    p.logits = tape.constant(Tensor({4, 2}, 0.7));
    CHECK(std::abs(classification_loss(p, gt, w).value().item() - std::log(2.0)) < 1e-9);
    CHECK_THROWS_AS(classification_loss(p, std::vector<std::uint8_t>{1, 0}, w), std::invalid_argument);

    const std::vector<std::uint8_t> skew{1, 0, 0, 0};
    const auto ws = inverse_frequency_weights(skew);
    CHECK(ws[1] == 2.0);
    CHECK(ws[0] == doctest::Approx(4.0 / 6.0));
    const std::vector<std::uint8_t> none{0, 0};
    CHECK(inverse_frequency_weights(none)[1] == 0.0);
    CHECK(inverse_frequency_weights(none)[0] == 1.0);
  }

  TEST_CASE("fusion and head gradient check") {
    Rng rng(8);
    ParamStore store;
    init_fusion_params(store, 8, rng);
    init_fl_params(store, 8, rng);
    const Tensor fs = random_tensor({24, 8}, rng), ft = random_tensor({24, 8}, rng), in = random_tensor({24, 6}, rng, 0, 1);
    std::vector<std::uint8_t> gt(24);
    for (std::size_t i = 0; i < 24; ++i) gt[i] = i % 3 == 0;
    const auto w = inverse_frequency_weights(gt);
    const auto r = grad_check(
        [&](Tape& t) {
          Rng drop(1);
          const auto p = fuse_and_classify(t, {Branch::spatial, t.constant(fs)}, {Branch::temporal, t.constant(ft)},
                                           render_lstm_feature(t, in, store), store, false, drop);
          return classification_loss(p, gt, w);
        },
        store, 1e-5, 0.3, 4);
    CHECK(r.coordinates_checked > 100);
    CHECK(r.max_relative_error < 1e-4);
  }

  TEST_CASE("full graph gradient check at toy size") {
    SaliencyConfig cfg;
    cfg.widths = {8, 16, 32};
    cfg.k = 8;
    Rng rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> c(0, 255);
    auto cloud = [&](std::vector<Vec3>& pos, std::vector<Color>& col, std::vector<double>& gray) {
      for (int i = 0; i < 48; ++i) {
        pos.push_back({u(rng), u(rng), u(rng)});
        col.push_back({std::uint8_t(c(rng)), std::uint8_t(c(rng)), std::uint8_t(c(rng))});
        gray.push_back(rgb_to_gray(col.back()) / 255.0);
      }
    };
    std::vector<Vec3> pa, pb;
    std::vector<Color> ca, cb;
    std::vector<double> ga, gb;
    cloud(pa, ca, ga);
    cloud(pb, cb, gb);
    const auto ha = build_hierarchy(pa, ga, cfg, 1), hb = build_hierarchy(pb, gb, cfg, 2);
    const auto ia = point_inputs(pa, ca), ib = point_inputs(pb, cb);
    std::vector<Color> fov(48);
    std::vector<std::uint8_t> gt(48);
    for (int i = 0; i < 48; ++i) {
      gt[i] = pa[i].x > 0;
      fov[i] = gt[i] ? Color{255, 255, 255} : Color{0, 0, 0};
    }
    const auto il = point_inputs(pa, fov);
    ParamStore store;
    init_saliency_params(store, cfg, rng);
    init_fl_params(store, 8, rng);
    init_fusion_params(store, 8, rng);
    const auto w = inverse_frequency_weights(gt);
    const auto r = grad_check(
        [&](Tape& t) {
          const auto enc = encode_pair(t, ha, ia, hb, ib, store, cfg);
          const auto fs = decode(t, enc.spatial, ha, store, cfg, Branch::spatial);
          const auto ft = decode(t, enc.temporal, ha, store, cfg, Branch::temporal);
          Rng drop(1);
          const auto p = fuse_and_classify(t, fs, ft, render_lstm_feature(t, il, store), store, false, drop);
          return classification_loss(p, gt, w);
        },
        store, 1e-5, 0.05, 5);
    CHECK(r.coordinates_checked > 100);
    CHECK(r.max_relative_error < 1e-4);
    MESSAGE("worst parameter " << r.worst_parameter << " error " << r.max_relative_error
                               << ", kink-straddling coordinates skipped: " << r.coordinates_skipped);
  }
}
