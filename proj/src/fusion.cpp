#include "voxport/fusion.hpp"

#include <stdexcept>

#include "voxport/ad/optim.hpp"
#include "voxport/errors.hpp"

namespace voxport {

void init_fusion_params(ad::ParamStore& store, std::size_t width, Rng& rng) {
  for (const char* w : {"fuse.w1", "fuse.w2", "fuse.w3", "fuse.w4"}) ad::add_dense_params(store, w, width, width, rng);
  ad::add_dense_params(store, "head.fc1", width, kHeadHidden1, rng);
  ad::add_dense_params(store, "head.fc2", kHeadHidden1, kHeadHidden2, rng);
  ad::add_dense_params(store, "head.fc3", kHeadHidden2, kClasses, rng);
}

FuseResult attention_fuse(ad::Tape& tape, const FeatureMap& a, const FeatureMap& b, const ad::ParamStore& store,
                          const std::string& wa, const std::string& wb, Branch out) {
  if (a.features.shape() != b.features.shape() || a.features.value().rank() != 2) {
    throw ShapeError("attention_fuse: " + ad::to_string(a.features.shape()) + " vs " +
                     ad::to_string(b.features.shape()));
  }
  auto mask = [&](const ad::Var& x, const std::string& w) {
    return ad::softmax(ad::dense(x, tape.param(store, w + ".w"), tape.param(store, w + ".b")), 1);
  };
  FuseResult r;
  r.mask_a = mask(a.features, wa);
  r.mask_b = mask(b.features, wb);
  r.fused = {out, ad::add(ad::mul(r.mask_a, a.features), ad::mul(r.mask_b, b.features))};
  return r;
}

Prediction classify(ad::Tape& tape, const FeatureMap& fused, const ad::ParamStore& store, bool training, Rng& rng,
                    double dropout_rate) {
  auto layer = [&](const ad::Var& x, const std::string& name, ad::Activation act) {
    return ad::dense(x, tape.param(store, name + ".w"), tape.param(store, name + ".b"), act);
  };
  auto h = ad::dropout(layer(fused.features, "head.fc1", ad::Activation::relu), dropout_rate, rng, training);
  h = ad::dropout(layer(h, "head.fc2", ad::Activation::relu), dropout_rate, rng, training);
  Prediction p;
  p.logits = layer(h, "head.fc3", ad::Activation::none);
  p.probabilities = ad::softmax(tape.constant(p.logits.value()), 1).value();
  const std::size_t n = p.probabilities.rows();
  p.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.labels[i] = p.probabilities.at(i, 1) > p.probabilities.at(i, 0);
  p.provenance = {fused.branch};
  return p;
}

Prediction fuse_and_classify(ad::Tape& tape, const FeatureMap& fs, const FeatureMap& ft, const FeatureMap& fl,
                             const ad::ParamStore& store, bool training, Rng& rng, double dropout_rate) {
  const auto st = attention_fuse(tape, fs, ft, store, "fuse.w1", "fuse.w2", Branch::fused_saliency);
  const auto e = attention_fuse(tape, st.fused, fl, store, "fuse.w3", "fuse.w4", Branch::fused);
  auto p = classify(tape, e.fused, store, training, rng, dropout_rate);
  p.provenance = {fs.branch, ft.branch, fl.branch};
  return p;
}

std::array<double, 2> inverse_frequency_weights(std::span<const std::uint8_t> labels) {
  std::array<double, 2> counts{0.0, 0.0};
  for (const auto l : labels) counts[l != 0] += 1.0;
  const double present = (counts[0] > 0) + (counts[1] > 0);
  std::array<double, 2> w{0.0, 0.0};
  for (int c = 0; c < 2; ++c) {
    if (counts[c] > 0) w[c] = static_cast<double>(labels.size()) / (present * counts[c]);
  }
  return w;
}

ad::Var classification_loss(const Prediction& pred, std::span<const std::uint8_t> gt,
                            std::span<const double> class_weights) {
  if (gt.size() != pred.labels.size()) {
    throw std::invalid_argument("loss: " + std::to_string(gt.size()) + " labels for " +
                                std::to_string(pred.labels.size()) + " predictions");
  }
  std::vector<int> y(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) y[i] = gt[i] != 0;
  return ad::weighted_cross_entropy(pred.logits, y, class_weights);
}

}  // namespace voxport
