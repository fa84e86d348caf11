#include "voxport/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxport/random.hpp"

namespace voxport::ad {

GradCheckResult grad_check(const std::function<Var(Tape&)>& loss, ParamStore& store, double h, double fraction,
                           std::uint64_t seed) {
  GradMap analytic;
  {
    Tape tape(true);
    analytic = tape.backward(loss(tape));
  }
  struct Eval {
    double value;
    std::uint64_t signature;
  };
  auto eval = [&] {
    Tape tape(false);
    tape.track_branches(true);
    const double v = loss(tape).value().item();
    return Eval{v, tape.branch_signature()};
  };

  Rng rng(seed);
  GradCheckResult result;
  for (const auto& name : store.names()) {
    Tensor& w = store.value(name);
    std::vector<std::size_t> coords(w.size());
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    const auto take = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(w.size()))), 1, w.size());

    const auto it = analytic.find(name);
    std::size_t done = 0;
    for (std::size_t pos = 0; pos < coords.size() && done < take; ++pos) {
      const std::size_t i = coords[pos];
      const double saved = w[i];
      w[i] = saved + h;
      const Eval up = eval();
      w[i] = saved - h;
      const Eval down = eval();
      w[i] = saved;
      if (up.signature != down.signature) {
        ++result.coordinates_skipped;
        continue;
      }
      const double numeric = (up.value - down.value) / (2.0 * h);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (err >= result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = name;
      }
      ++result.coordinates_checked;
      ++done;
    }
  }
  return result;
}

}  // namespace voxport::ad
