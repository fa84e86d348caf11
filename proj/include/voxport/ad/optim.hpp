#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "voxport/ad/tensor.hpp"
#include "voxport/random.hpp"

namespace voxport::ad {

/// Uniform on [-sqrt(6 / (fan_in + fan_out)), +sqrt(...)], shape [fan_in, fan_out].
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Registers `<prefix>.w` (Glorot) and `<prefix>.b` (zeros).
void add_dense_params(ParamStore& store, const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

class Adam {
 public:
  explicit Adam(double lr = 1e-2, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update from the gradients currently held in `store`.
  void step(ParamStore& store);
  std::size_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

}  // namespace voxport::ad
