#include "imupen/autodiff.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "imupen/errors.hpp"

namespace imupen::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_))
    throw ShapeError("tensor data has " + std::to_string(data_.size()) + " values for shape " + shape_string(shape_));
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw ArgumentError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ArgumentError("variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::input(Tensor value, bool requires_grad) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.owned.zero_grad();
  return {nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  if (!param.has_grad()) param.zero_grad();
  Node& n = nodes_.emplace_back();
  n.external = &param;
  n.requires_grad = true;
  return {nodes_.size() - 1};
}

Var Tape::emit(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || node(in).requires_grad;
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = needs;
  if (needs) {
    n.owned.zero_grad();
    n.backward = std::move(backward);
  }
  return {nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const { return node(v).tensor(); }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

std::span<double> Tape::grad(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return {};
  return n.tensor().grad();
}

void Tape::backward(Var root, std::span<const double> seed) {
  Node& r = node(root);
  if (!r.requires_grad) return;
  auto g = r.tensor().grad();
  if (seed.size() != g.size()) throw ShapeError("backward seed does not match the root shape");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.backward) n.backward(*this, Var{id});
  }
}

}  // namespace imupen::nn
