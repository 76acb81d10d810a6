#include "imupen/optim.hpp"

#include <cmath>

#include "imupen/errors.hpp"

namespace imupen::nn {

void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (state.m.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("optimizer state holds " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->size() || state.v[i].size() != params[i]->size())
      throw ShapeError("optimizer state does not match parameter " + std::to_string(i));
    if (!params[i]->has_grad()) throw ShapeError("parameter " + std::to_string(i) + " has no gradient");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->data();
    auto g = params[i]->grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      w[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.eps);
    }
  }
}

}  // namespace imupen::nn
