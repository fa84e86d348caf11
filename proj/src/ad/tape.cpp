#include "voxport/ad/tape.hpp"

#include <stdexcept>

#include "voxport/errors.hpp"
#include "voxport/random.hpp"

namespace voxport::ad {

Tensor& detail::Node::ensure_grad() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Tensor Var::grad() const {
  if (node_->grad.shape() == node_->value.shape() && node_->grad.size() == node_->value.size()) return node_->grad;
  return Tensor(node_->value.shape());
}

void Tape::note_branch(std::uint64_t bits) { branch_signature_ = splitmix64(branch_signature_ ^ bits); }

Var Tape::constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(this, std::move(node));
}

Var Tape::variable(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = record_;
  if (record_) nodes_.push_back(node);
  return Var(this, std::move(node));
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  auto node = std::make_shared<detail::Node>();
  node->value = store.value(name);
  node->param = name;
  node->requires_grad = record_;
  if (record_) nodes_.push_back(node);
  params_[name] = node;
  return Var(this, std::move(node));
}

Var Tape::make(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  if (record_) {
    for (const auto& in : inputs) {
      if (in.tape_ != this) throw std::invalid_argument("op mixes Vars from different tapes");
      node->requires_grad = node->requires_grad || in.requires_grad();
    }
    if (node->requires_grad) {
      node->inputs.reserve(inputs.size());
      for (auto& in : inputs) node->inputs.push_back(in.node_);
      node->backward = std::move(backward);
      nodes_.push_back(node);
    }
  }
  return Var(this, std::move(node));
}

GradMap Tape::backward(const Var& loss) {
  if (!loss.valid() || loss.tape_ != this) throw std::invalid_argument("loss does not belong to this tape");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!record_) throw std::invalid_argument("backward on a non-recording tape");
  if (loss.requires_grad()) {
    loss.node_->ensure_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      detail::Node& n = **it;
      if (n.backward && n.grad.size() == n.value.size() && n.grad.size() > 0) n.backward(n);
    }
  }
  GradMap grads;
  for (const auto& [name, node] : params_) {
    grads[name] = node->grad.shape() == node->value.shape() && node->grad.size() == node->value.size()
                      ? node->grad
                      : Tensor(node->value.shape());
  }
  return grads;
}

GradMap backward(Tape& tape, const Var& loss) { return tape.backward(loss); }

void backward(Tape& tape, const Var& loss, ParamStore& store) { store.accumulate(tape.backward(loss)); }

}  // namespace voxport::ad
