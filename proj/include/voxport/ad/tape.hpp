#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxport/ad/tensor.hpp"

namespace voxport::ad {

class Tape;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation during backward
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  std::string param;  // non-empty for parameter leaves
  bool requires_grad = false;

  Tensor& ensure_grad();
};

}  // namespace detail

/// Handle to a tape node. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return node_ != nullptr; }
  Tape& tape() const { return *tape_; }
  /// Gradient after Tape::backward; zeros when the node was not reached.
  Tensor grad() const;

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::shared_ptr<detail::Node> node) : tape_(tape), node_(std::move(node)) {}

  Tape* tape_ = nullptr;
  std::shared_ptr<detail::Node> node_;
};

/// Records operations for one reverse sweep.
///
/// Nodes are appended in creation order, which is a topological order, so the
/// backward sweep walks them once in reverse. A non-recording tape keeps no
/// history: intermediates are freed as soon as their Vars go out of scope.
/// A tape is single-threaded; independent tapes may run concurrently.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  /// When enabled, piecewise ops (relu, leaky relu, max-pool) fold the branch
  /// each element took into a running signature. Two evaluations with equal
  /// signatures lie on the same smooth piece of the function.
  void track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const { return track_branches_; }
  void note_branch(std::uint64_t bits);
  std::uint64_t branch_signature() const { return branch_signature_; }

  Var constant(Tensor value);
  /// Leaf that receives a gradient readable through Var::grad().
  Var variable(Tensor value);
  /// Leaf bound to a named parameter; repeated calls return the same node.
  Var param(const ParamStore& store, const std::string& name);

  /// Adds an op node. `backward` reads node.grad and accumulates into the
  /// grads of node.inputs that require them.
  Var make(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);

  /// Reverse sweep from a single-element loss. Returns gradients of every
  /// parameter bound to this tape (zeros for unreached ones).
  GradMap backward(const Var& loss);

 private:
  bool record_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 0;
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::map<std::string, std::shared_ptr<detail::Node>> params_;
};

GradMap backward(Tape& tape, const Var& loss);
/// Sweeps and adds the parameter gradients into `store`.
void backward(Tape& tape, const Var& loss, ParamStore& store);

}  // namespace voxport::ad
