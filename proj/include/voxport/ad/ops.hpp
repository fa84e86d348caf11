#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "voxport/ad/tape.hpp"
#include "voxport/random.hpp"

namespace voxport::ad {

enum class Activation { none, relu, leaky_relu, sigmoid, tanh };

inline constexpr double kLeakySlope = 0.2;

/// x[..., d_in] * w[d_in, d_out] + b[d_out], activation applied elementwise.
/// The affine map is shared across all leading axes. Throws ShapeError.
Var dense(const Var& x, const Var& w, const Var& b, Activation act = Activation::none);
Var matmul(const Var& x, const Var& w);
Var activate(const Var& x, Activation act);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// Multiplies every entry of `a` by the single value held in `s`.
Var mul_scalar(const Var& a, const Var& s);

/// Concatenation along the last axis; leading dimensions must agree.
Var concat(const std::vector<Var>& parts);
Var reshape(const Var& x, Shape shape);
/// Rows of a [R, D] tensor picked by index (repeats allowed).
Var gather_rows(const Var& x, std::span<const std::size_t> rows);

/// Max-subtracted softmax along `axis`.
Var softmax(const Var& x, std::size_t axis);

/// Attention pooling over groups of K consecutive rows:
/// out[i, d] = sum_k feat[i*K+k, d] * softmax_k(score[i*K+k, d]).
Var attentive_pool(const Var& features, const Var& scores, std::size_t k);

/// Columnwise maximum of [N, D] -> [D]; the gradient goes to the first row
/// attaining each maximum. Throws std::invalid_argument when N == 0.
Var max_pool_global(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
Var mse(const Var& a, const Var& b);

/// Temporal saliency operator G(s) = 1 / (1 + exp(s)) + 1, elementwise.
Var temporal_intensity(const Var& s);
double temporal_intensity(double s);

/// Inverted dropout. Identity when `training` is false.
Var dropout(const Var& x, double rate, Rng& rng, bool training);

/// Mean over rows of w[y] * -log softmax(logits)[y].
Var weighted_cross_entropy(const Var& logits, std::span<const int> labels, std::span<const double> class_weights);

}  // namespace voxport::ad
