#include "voxport/ad/optim.hpp"

#include <cmath>
#include <random>

namespace voxport::ad {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor w({fan_in, fan_out});
  for (auto& v : w.storage()) v = u(rng);
  return w;
}

void add_dense_params(ParamStore& store, const std::string& prefix, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  store.add(prefix + ".w", glorot_uniform(fan_in, fan_out, rng));
  store.add(prefix + ".b", Tensor({fan_out}));
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : store.names()) {
    Tensor& w = store.value(name);
    const Tensor& g = store.grad(name);
    auto [mit, fresh] = m_.try_emplace(name, Tensor(w.shape()));
    if (fresh) v_.emplace(name, Tensor(w.shape()));
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace voxport::ad
