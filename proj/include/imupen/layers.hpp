#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "imupen/autodiff.hpp"
#include "imupen/kernels.hpp"

namespace imupen::nn {

enum class Mode { kTrain, kEval };

// Sequence tensors are [batch, time, features].

/// Same-length 1-D convolution; w is [out, in, kernel], zero padding of
/// (kernel-1)/2 frames on the left and the rest on the right.
Var conv1d(Tape& tape, Var x, Var w, Var b);

/// Max over non-overlapping windows of `pool` frames; a trailing partial
/// window is kept. Gradients go to the first maximum of each window.
Var maxpool1d(Tape& tape, Var x, std::size_t pool);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  bool initialized = false;
};

/// Per-channel normalization over batch and time. Train mode uses batch
/// statistics and folds them into `state`; eval mode requires a state that
/// has seen at least one train step.
Var batchnorm1d(Tape& tape, Var x, Var gamma, Var beta, BatchNormState& state, Mode mode, double momentum,
                double eps);

/// Inverted dropout with a mask drawn from `seed`. Identity in eval mode or
/// at rate 0.
Var dropout(Tape& tape, Var x, double rate, Mode mode, std::uint64_t seed);

/// Single-direction LSTM with zero initial state. wx is [4H, in], wh is
/// [4H, H], gate order input, forget, candidate, output. A reverse LSTM
/// runs from the last frame to the first but writes outputs in place.
Var lstm(Tape& tape, Var x, Var wx, Var wh, Var b, bool reverse, kernels::Activation activation);

/// Concatenates two sequence tensors along the feature axis.
Var concat_features(Tape& tape, Var a, Var b);

/// Affine map over the last axis; w is [out, in].
Var dense(Tape& tape, Var x, Var w, Var b);

Var relu(Tape& tape, Var x);

/// [batch, time, features] -> [batch, features].
Var mean_over_time(Tape& tape, Var x);

/// Log-softmax over the last axis.
Var log_softmax(Tape& tape, Var x);

}  // namespace imupen::nn
