#include "voxport/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "voxport/ad/optim.hpp"
#include "voxport/errors.hpp"
#include "voxport/knn.hpp"

namespace voxport {

using ad::Activation;
using ad::Tape;
using ad::Tensor;
using ad::Var;

double SaliencyConfig::keep_ratio(std::size_t level) const { return level == levels() ? 0.5 : 0.25; }

std::vector<std::size_t> PointHierarchy::counts() const {
  std::vector<std::size_t> out;
  for (const auto& l : levels) out.push_back(l.positions.size());
  return out;
}

std::vector<std::size_t> level_counts(std::size_t n, const SaliencyConfig& cfg) {
  std::vector<std::size_t> out{n};
  for (std::size_t c = 1; c <= cfg.levels(); ++c) {
    const double kept = std::ceil(static_cast<double>(out.back()) * cfg.keep_ratio(c));
    out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(kept)));
  }
  return out;
}

Tensor neighbor_descriptors(std::span<const Vec3> positions, std::span<const double> grays,
                            std::span<const std::size_t> neighbors, std::size_t k) {
  const std::size_t n = positions.size();
  if (neighbors.size() != n * k) throw std::invalid_argument("neighbor list does not hold k entries per point");
  Tensor out({n * k, kDescriptorWidth});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t nb = neighbors[i * k + j];
      const Vec3 pi = positions[i], pk = positions[nb], d = pi - pk;
      const double gi = grays[i], gk = grays[nb];
      double* row = out.data() + (i * k + j) * kDescriptorWidth;
      const double values[kDescriptorWidth] = {pi.x, pi.y, pi.z, pk.x, pk.y, pk.z,      d.x,
                                               d.y,  d.z,  norm(d), gi, gk, gi - gk, std::abs(gi - gk)};
      std::copy(std::begin(values), std::end(values), row);
    }
  }
  return out;
}

std::vector<std::size_t> rs_keep_indices(std::size_t count, double ratio, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("random downsampling of an empty set");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("keep ratio must lie in (0, 1]");
  const auto keep = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(static_cast<double>(count) * ratio)),
                                            1, count);
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

void fill_neighbors(HierarchyLevel& level, std::size_t k_cfg) {
  const std::size_t n = level.positions.size();
  level.k = std::min(k_cfg, n);
  const KnnIndex index(std::span<const Vec3>(level.positions));
  level.neighbors.resize(n * level.k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = index.knn(level.positions[i], level.k);
    std::copy(nb.begin(), nb.end(), level.neighbors.begin() + static_cast<std::ptrdiff_t>(i * level.k));
  }
  level.descriptors = neighbor_descriptors(level.positions, level.grays, level.neighbors, level.k);
}

}  // namespace

PointHierarchy build_hierarchy(std::span<const Vec3> positions, std::span<const double> grays,
                               const SaliencyConfig& cfg, std::uint64_t seed) {
  if (positions.empty()) throw std::invalid_argument("cannot build a hierarchy over zero points");
  if (grays.size() != positions.size()) throw std::invalid_argument("one gray value per point required");
  PointHierarchy h;
  h.levels.resize(cfg.levels() + 1);
  h.levels[0].positions.assign(positions.begin(), positions.end());
  h.levels[0].grays.assign(grays.begin(), grays.end());
  if (cfg.levels() > 0) fill_neighbors(h.levels[0], cfg.k);

  for (std::size_t c = 1; c <= cfg.levels(); ++c) {
    const HierarchyLevel& prev = h.levels[c - 1];
    HierarchyLevel& cur = h.levels[c];
    cur.kept = rs_keep_indices(prev.positions.size(), cfg.keep_ratio(c), derive_seed(seed, {c}));
    for (auto i : cur.kept) {
      cur.positions.push_back(prev.positions[i]);
      cur.grays.push_back(prev.grays[i]);
    }
    const KnnIndex index(std::span<const Vec3>(cur.positions));
    cur.upsample.resize(prev.positions.size());
    for (std::size_t i = 0; i < prev.positions.size(); ++i) cur.upsample[i] = index.knn(prev.positions[i], 1)[0];
    if (c < cfg.levels()) fill_neighbors(cur, cfg.k);
  }
  return h;
}

PointHierarchy permute_hierarchy(const PointHierarchy& h, std::span<const std::size_t> perm) {
  const HierarchyLevel& src = h.levels.at(0);
  const std::size_t n = src.positions.size();
  if (perm.size() != n) throw std::invalid_argument("permutation length differs from point count");
  std::vector<std::size_t> inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] >= n || inv[perm[i]] != n) throw std::invalid_argument("not a permutation");
    inv[perm[i]] = i;
  }
  PointHierarchy out = h;
  HierarchyLevel& dst = out.levels[0];
  const std::size_t k = src.k;
  for (std::size_t i = 0; i < n; ++i) {
    dst.positions[i] = src.positions[perm[i]];
    dst.grays[i] = src.grays[perm[i]];
    for (std::size_t j = 0; j < k; ++j) {
      dst.neighbors[i * k + j] = inv[src.neighbors[perm[i] * k + j]];
      std::copy_n(src.descriptors.data() + (perm[i] * k + j) * kDescriptorWidth, kDescriptorWidth,
                  dst.descriptors.data() + (i * k + j) * kDescriptorWidth);
    }
  }
  if (out.levels.size() > 1) {
    auto& next = out.levels[1];
    for (auto& idx : next.kept) idx = inv[idx];
    for (std::size_t i = 0; i < n; ++i) next.upsample[i] = h.levels[1].upsample[perm[i]];
  }
  return out;
}

void init_ldc_params(ad::ParamStore& store, const std::string& prefix, std::size_t w_in, std::size_t w_out,
                     Rng& rng) {
  const std::size_t h = std::max<std::size_t>(1, w_out / 2);
  ad::add_dense_params(store, prefix + ".r1.de", kDescriptorWidth, h, rng);
  ad::add_dense_params(store, prefix + ".r1.score", h + w_in, h + w_in, rng);
  ad::add_dense_params(store, prefix + ".r1.post", h + w_in, h, rng);
  ad::add_dense_params(store, prefix + ".r2.de", kDescriptorWidth, h, rng);
  ad::add_dense_params(store, prefix + ".r2.score", 2 * h, 2 * h, rng);
  ad::add_dense_params(store, prefix + ".r2.post", 2 * h, w_out, rng);
  ad::add_dense_params(store, prefix + ".short", w_in, w_out, rng);
}

void init_saliency_params(ad::ParamStore& store, const SaliencyConfig& cfg, Rng& rng) {
  const auto& w = cfg.widths;
  ad::add_dense_params(store, "init.fc", 6, w[0], rng);
  for (std::size_t c = 1; c <= cfg.levels(); ++c) {
    const std::string lc = std::to_string(c);
    init_ldc_params(store, "ldc." + lc, w[c - 1], w[c], rng);
    if (c >= 2) init_ldc_params(store, "tc." + lc + ".ldc", w[c - 1], w[c], rng);
    ad::add_dense_params(store, "tc." + lc + ".sim1", 2 * w[c], w[c], rng);
    ad::add_dense_params(store, "tc." + lc + ".sim2", w[c], 1, rng);
    ad::add_dense_params(store, "dec." + lc + ".s", w[c] + w[c - 1], w[c - 1], rng);
    ad::add_dense_params(store, "dec." + lc + ".t", w[c] + w[c - 1], w[c - 1], rng);
  }
}

Tensor point_inputs(std::span<const Vec3> positions, std::span<const Color> colors) {
  if (colors.size() != positions.size()) throw std::invalid_argument("one color per position required");
  Tensor out({positions.size(), 6});
  for (std::size_t i = 0; i < positions.size(); ++i) {
    double* row = out.data() + i * 6;
    row[0] = positions[i].x;
    row[1] = positions[i].y;
    row[2] = positions[i].z;
    row[3] = colors[i].r / 255.0;
    row[4] = colors[i].g / 255.0;
    row[5] = colors[i].b / 255.0;
  }
  return out;
}

namespace {

Var dense_p(Tape& tape, const Var& x, const ad::ParamStore& store, const std::string& prefix,
            Activation act = Activation::none) {
  return ad::dense(x, tape.param(store, prefix + ".w"), tape.param(store, prefix + ".b"), act);
}

}  // namespace

Var initial_features(Tape& tape, const Tensor& inputs, const ad::ParamStore& store, const std::string& prefix) {
  return dense_p(tape, tape.constant(inputs), store, prefix);
}

Var neighborhood_encode(Tape& tape, const HierarchyLevel& level, const Var& features, const ad::ParamStore& store,
                        const std::string& prefix) {
  if (level.k == 0 || level.k > level.positions.size()) {
    throw std::invalid_argument("neighborhood of " + std::to_string(level.k) + " points requested from a set of " +
                                std::to_string(level.positions.size()));
  }
  if (features.value().rows() != level.positions.size()) {
    throw ShapeError("feature rows " + std::to_string(features.value().rows()) + " do not match " +
                     std::to_string(level.positions.size()) + " points");
  }
  const Var de = dense_p(tape, tape.constant(level.descriptors), store, prefix + ".de", Activation::leaky_relu);
  return ad::concat({de, ad::gather_rows(features, level.neighbors)});
}

Var attention_pool(Tape& tape, const Var& enhanced, std::size_t k, const ad::ParamStore& store,
                   const std::string& prefix) {
  const Var scores = dense_p(tape, enhanced, store, prefix + ".score");
  return ad::attentive_pool(enhanced, scores, k);
}

Var ldc_forward(Tape& tape, const HierarchyLevel& level, const Var& features, const ad::ParamStore& store,
                const std::string& prefix) {
  const Var e1 = neighborhood_encode(tape, level, features, store, prefix + ".r1");
  const Var p1 = dense_p(tape, attention_pool(tape, e1, level.k, store, prefix + ".r1"), store, prefix + ".r1.post",
                         Activation::leaky_relu);
  // The second round gathers round-one outputs, so each point sees up to k^2 neighbors.
  const Var e2 = neighborhood_encode(tape, level, p1, store, prefix + ".r2");
  const Var p2 = dense_p(tape, attention_pool(tape, e2, level.k, store, prefix + ".r2"), store, prefix + ".r2.post");
  const Var shortcut = dense_p(tape, features, store, prefix + ".short");
  return ad::activate(ad::add(p2, shortcut), Activation::leaky_relu);
}

RsResult rs_downsample(std::span<const Vec3> positions, const Var& features, double ratio, std::uint64_t seed) {
  RsResult out;
  out.kept = rs_keep_indices(positions.size(), ratio, seed);
  for (auto i : out.kept) out.positions.push_back(positions[i]);
  out.features = ad::gather_rows(features, out.kept);
  return out;
}

TcResult tc_forward(Tape& tape, const Var& tc_t, const Var& tc_prev, const ad::ParamStore& store,
                    const std::string& prefix) {
  const std::size_t w = tc_t.value().cols();
  if (tc_prev.value().cols() != w) {
    throw ShapeError("temporal inputs have widths " + std::to_string(w) + " and " +
                     std::to_string(tc_prev.value().cols()));
  }
  const Var q_t = ad::reshape(ad::max_pool_global(tc_t), {1, w});
  const Var q_prev = ad::reshape(ad::max_pool_global(tc_prev), {1, w});
  const Var hidden = dense_p(tape, ad::concat({q_t, q_prev}), store, prefix + ".sim1", Activation::leaky_relu);
  const Var s = ad::reshape(dense_p(tape, hidden, store, prefix + ".sim2"), {1});
  const Var o_s = ad::temporal_intensity(s);
  return {ad::mul_scalar(tc_t, o_s), o_s};
}

std::vector<Var> encode(Tape& tape, const PointHierarchy& h, const Var& f0, const ad::ParamStore& store,
                        const SaliencyConfig& cfg) {
  std::vector<Var> out{f0};
  for (std::size_t c = 1; c <= cfg.levels(); ++c) {
    const Var y = ldc_forward(tape, h.levels[c - 1], out.back(), store, "ldc." + std::to_string(c));
    out.push_back(ad::gather_rows(y, h.levels[c].kept));
  }
  return out;
}

PairEncoding encode_pair(Tape& tape, const PointHierarchy& h_t, const Tensor& inputs_t, const PointHierarchy& h_prev,
                         const Tensor& inputs_prev, const ad::ParamStore& store, const SaliencyConfig& cfg) {
  if (h_t.levels.size() != cfg.levels() + 1 || h_prev.levels.size() != cfg.levels() + 1) {
    throw std::invalid_argument("hierarchy depth does not match the configured level count");
  }
  PairEncoding out;
  out.spatial = encode(tape, h_t, initial_features(tape, inputs_t, store), store, cfg);
  const auto prev = encode(tape, h_prev, initial_features(tape, inputs_prev, store), store, cfg);

  out.temporal.push_back(out.spatial[0]);
  for (std::size_t c = 1; c <= cfg.levels(); ++c) {
    const std::string lc = std::to_string(c);
    Var tc_t = out.spatial[1];
    if (c >= 2) {
      const Var y = ldc_forward(tape, h_t.levels[c - 1], out.temporal.back(), store, "tc." + lc + ".ldc");
      tc_t = ad::gather_rows(y, h_t.levels[c].kept);
    }
    auto tc = tc_forward(tape, tc_t, prev[c], store, "tc." + lc);
    out.temporal.push_back(tc.c_t);
    out.intensity.push_back(tc.o_s);
  }
  return out;
}

FeatureMap decode(Tape& tape, const std::vector<Var>& skips, const PointHierarchy& h, const ad::ParamStore& store,
                  const SaliencyConfig& cfg, Branch branch) {
  if (skips.size() != cfg.levels() + 1 || h.levels.size() != skips.size()) {
    throw std::invalid_argument("decoder needs one skip per hierarchy level");
  }
  const char* tag = branch == Branch::temporal ? ".t" : ".s";
  Var current = skips.back();
  for (std::size_t c = cfg.levels(); c >= 1; --c) {
    const Var up = ad::gather_rows(current, h.levels[c].upsample);
    current = dense_p(tape, ad::concat({up, skips[c - 1]}), store, "dec." + std::to_string(c) + tag,
                      Activation::leaky_relu);
  }
  return {branch, current};
}

}  // namespace voxport
