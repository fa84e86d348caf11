#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "voxport/ad/tape.hpp"

namespace voxport::ad {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  // Coordinates whose +h and -h evaluations took different branches of a
  // piecewise op; replaced by further coordinates of the same parameter.
  std::size_t coordinates_skipped = 0;
  std::string worst_parameter;
};

/// Compares reverse-mode gradients with central differences on a random
/// subset of parameter coordinates (at least one per parameter).
/// Relative error is |a - n| / max(|a|, |n|, 1e-6). A central difference that
/// straddles a relu/leaky-relu kink or a max-pool argmax change is not a valid
/// derivative estimate; such coordinates are detected through the tape's
/// branch signature and skipped.
/// `loss` must bind parameters through Tape::param and be deterministic.
GradCheckResult grad_check(const std::function<Var(Tape&)>& loss, ParamStore& store, double h = 1e-5,
                           double fraction = 0.05, std::uint64_t seed = 0);

}  // namespace voxport::ad
