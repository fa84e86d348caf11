#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxport/ad/ops.hpp"
#include "voxport/random.hpp"
#include "voxport/saliency.hpp"

namespace voxport {

inline constexpr std::size_t kHeadHidden1 = 64;
inline constexpr std::size_t kHeadHidden2 = 32;
inline constexpr std::size_t kClasses = 2;

/// fuse.w1..fuse.w4 (width -> width, with bias) and head.fc1..head.fc3
/// (width -> 64 -> 32 -> 2).
void init_fusion_params(ad::ParamStore& store, std::size_t width, Rng& rng);

struct FuseResult {
  FeatureMap fused;
  ad::Var mask_a;  // softmax over channels, one row per point
  ad::Var mask_b;
};

/// softmax(gamma(a, Wa)) * a + softmax(gamma(b, Wb)) * b, where gamma is the
/// dense layer `<wa>` / `<wb>` and the softmax runs over each point's channels.
/// Throws ShapeError when a and b differ in shape.
FuseResult attention_fuse(ad::Tape& tape, const FeatureMap& a, const FeatureMap& b, const ad::ParamStore& store,
                          const std::string& wa, const std::string& wb, Branch out);

struct Prediction {
  ad::Var logits;                     // [N, 2]
  ad::Tensor probabilities;           // [N, 2]
  std::vector<std::uint8_t> labels;   // argmax, ties to class 0
  std::vector<Branch> provenance;
};

/// Three dense layers (relu, relu, none) with dropout after the two hidden
/// layers when `training` is set.
Prediction classify(ad::Tape& tape, const FeatureMap& fused, const ad::ParamStore& store, bool training, Rng& rng,
                    double dropout_rate = 0.5);

/// F_ST from (F_S, F_T) through W1/W2, then F_E from (F_ST, F_L) through W3/W4,
/// then the head.
Prediction fuse_and_classify(ad::Tape& tape, const FeatureMap& fs, const FeatureMap& ft, const FeatureMap& fl,
                             const ad::ParamStore& store, bool training, Rng& rng, double dropout_rate = 0.5);

/// w_c = n / (classes present * n_c); zero for an absent class.
std::array<double, 2> inverse_frequency_weights(std::span<const std::uint8_t> labels);

/// Class-weighted cross-entropy, mean over points. Throws
/// std::invalid_argument on a length mismatch.
ad::Var classification_loss(const Prediction& pred, std::span<const std::uint8_t> gt,
                            std::span<const double> class_weights);

}  // namespace voxport
