#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imupen/tensor.hpp"

namespace imupen::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update using each tensor's gradient. Moment
/// buffers are created on the first step; later steps throw ShapeError if
/// the parameter list no longer matches them.
void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& cfg);

}  // namespace imupen::nn
