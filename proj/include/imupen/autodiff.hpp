#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>

#include "imupen/tensor.hpp"

namespace imupen::nn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode tape. Nodes are recorded in evaluation order, so replaying
/// their backward closures from last to first visits every node after all of
/// its consumers.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor value, bool requires_grad = false);
  /// Records an external tensor by reference. Its gradient buffer is
  /// allocated if missing and receives accumulated gradients.
  Var parameter(Tensor& param);
  /// Records an op result. The node needs a gradient if any input does.
  Var emit(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const;
  /// Gradient buffer; empty for nodes that do not require one.
  std::span<double> grad(Var v);

  /// Seeds d(objective)/d(root) = seed and propagates to every node.
  void backward(Var root, std::span<const double> seed);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Smallest distance from any recorded relu input to 0 or max-pool winner
  /// to its runner-up. Finite-difference checks need steps well below it.
  double kink_distance() const noexcept { return kink_distance_; }
  void note_kink_distance(double d) noexcept { kink_distance_ = std::min(kink_distance_, d); }

 private:
  struct Node {
    Tensor owned;
    Tensor* external = nullptr;
    bool requires_grad = false;
    Backward backward;
    Tensor& tensor() { return external ? *external : owned; }
    const Tensor& tensor() const { return external ? *external : owned; }
  };
  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  double kink_distance_ = std::numeric_limits<double>::infinity();
};

}  // namespace imupen::nn
