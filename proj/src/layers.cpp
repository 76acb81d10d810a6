#include "imupen/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "imupen/errors.hpp"
#include "imupen/rng.hpp"

namespace imupen::nn {
namespace {

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
}

// Gradient buffer of `v`, or a throwaway buffer of the right size when `v`
// does not need one (kernels always write parameter gradients).
std::span<double> grad_or_scratch(Tape& tape, Var v, std::vector<double>& scratch) {
  auto g = tape.grad(v);
  if (!g.empty()) return g;
  scratch.assign(tape.value(v).size(), 0.0);
  return scratch;
}

}  // namespace

Var conv1d(Tape& tape, Var x, Var w, Var b) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  expect_rank(xv, 3, "conv1d input");
  expect_rank(wv, 3, "conv1d weight");
  const kernels::ConvShape s{xv.dim(0), xv.dim(1), xv.dim(2), wv.dim(0), wv.dim(2)};
  if (wv.dim(1) != s.in_channels || tape.value(b).shape() != Shape{s.out_channels} || s.kernel == 0)
    throw ShapeError("conv1d weight " + shape_string(wv.shape()) + " does not fit input " + shape_string(xv.shape()));
  Tensor y({s.batch, s.time, s.out_channels});
  kernels::parallel::conv1d_forward(s, xv.data(), wv.data(), tape.value(b).data(), y.data());
  return tape.emit(std::move(y), {x, w, b}, [=](Tape& t, Var self) {
    std::vector<double> sw, sb;
    kernels::parallel::conv1d_backward(s, t.value(x).data(), t.value(w).data(), t.grad(self), t.grad(x),
                                       grad_or_scratch(t, w, sw), grad_or_scratch(t, b, sb));
  });
}

Var maxpool1d(Tape& tape, Var x, std::size_t pool) {
  if (pool == 0) throw ArgumentError("pool size must be at least 1");
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "maxpool1d input");
  const std::size_t B = xv.dim(0), T = xv.dim(1), C = xv.dim(2);
  const std::size_t out_t = (T + pool - 1) / pool;
  Tensor y({B, out_t, C});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out_t; ++o)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = (b * T + o * pool) * C + c;
        double runner_up = -std::numeric_limits<double>::infinity();
        for (std::size_t t = o * pool + 1; t < std::min(T, (o + 1) * pool); ++t) {
          const std::size_t idx = (b * T + t) * C + c;
          if (xv[idx] > xv[best]) {
            runner_up = xv[best];
            best = idx;
          } else {
            runner_up = std::max(runner_up, xv[idx]);
          }
        }
        tape.note_kink_distance(xv[best] - runner_up);
        const std::size_t out = (b * out_t + o) * C + c;
        y[out] = xv[best];
        (*argmax)[out] = best;
      }
  return tape.emit(std::move(y), {x}, [=](Tape& t, Var self) {
    auto gx = t.grad(x);
    if (gx.empty()) return;
    const auto gy = t.grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[(*argmax)[i]] += gy[i];
  });
}

Var batchnorm1d(Tape& tape, Var x, Var gamma, Var beta, BatchNormState& state, Mode mode, double momentum,
                double eps) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "batchnorm1d input");
  const std::size_t C = xv.dim(2);
  const std::size_t N = xv.dim(0) * xv.dim(1);
  if (tape.value(gamma).shape() != Shape{C} || tape.value(beta).shape() != Shape{C})
    throw ShapeError("batchnorm1d affine parameters must have one entry per channel");
  if (N == 0) throw ShapeError("batchnorm1d on an empty batch");
  if (state.running_mean.size() != C) {
    state.running_mean.assign(C, 0.0);
    state.running_var.assign(C, 1.0);
    state.initialized = false;
  }
  const auto g = tape.value(gamma).data();
  const auto bt = tape.value(beta).data();

  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  Tensor y(xv.shape());
  if (mode == Mode::kTrain) {
    if (N < 2) throw ShapeError("batchnorm1d needs at least two frames in train mode");
    for (std::size_t c = 0; c < C; ++c) {
      double mean = 0.0;
      for (std::size_t n = 0; n < N; ++n) mean += xv[n * C + c];
      mean /= static_cast<double>(N);
      double var = 0.0;
      for (std::size_t n = 0; n < N; ++n) var += (xv[n * C + c] - mean) * (xv[n * C + c] - mean);
      var /= static_cast<double>(N);
      (*inv_std)[c] = 1.0 / std::sqrt(var + eps);
      for (std::size_t n = 0; n < N; ++n) {
        const double h = (xv[n * C + c] - mean) * (*inv_std)[c];
        (*xhat)[n * C + c] = h;
        y[n * C + c] = g[c] * h + bt[c];
      }
      const double unbiased = var * static_cast<double>(N) / static_cast<double>(N - 1);
      state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * mean;
      state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * unbiased;
    }
    state.initialized = true;
  } else {
    if (!state.initialized) throw StateError("batch norm evaluated before any training step");
    for (std::size_t c = 0; c < C; ++c) {
      (*inv_std)[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
      for (std::size_t n = 0; n < N; ++n) {
        const double h = (xv[n * C + c] - state.running_mean[c]) * (*inv_std)[c];
        (*xhat)[n * C + c] = h;
        y[n * C + c] = g[c] * h + bt[c];
      }
    }
  }
  const bool batch_stats = mode == Mode::kTrain;
  return tape.emit(std::move(y), {x, gamma, beta}, [=](Tape& t, Var self) {
    const auto gy = t.grad(self);
    const auto gv = t.value(gamma).data();
    auto gx = t.grad(x);
    auto gg = t.grad(gamma);
    auto gb = t.grad(beta);
    for (std::size_t c = 0; c < C; ++c) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        sum_g += gy[n * C + c];
        sum_gh += gy[n * C + c] * (*xhat)[n * C + c];
      }
      if (!gg.empty()) gg[c] += sum_gh;
      if (!gb.empty()) gb[c] += sum_g;
      if (gx.empty()) continue;
      const double scale = gv[c] * (*inv_std)[c];
      if (!batch_stats) {
        for (std::size_t n = 0; n < N; ++n) gx[n * C + c] += scale * gy[n * C + c];
        continue;
      }
      const double inv_n = 1.0 / static_cast<double>(N);
      for (std::size_t n = 0; n < N; ++n)
        gx[n * C + c] += scale * (gy[n * C + c] - inv_n * sum_g - (*xhat)[n * C + c] * inv_n * sum_gh);
    }
  });
}

Var dropout(Tape& tape, Var x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (mode == Mode::kEval || rate == 0.0) return x;
  const Tensor& xv = tape.value(x);
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  Rng rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = keep(rng) ? scale : 0.0;
    y[i] = xv[i] * (*mask)[i];
  }
  return tape.emit(std::move(y), {x}, [=](Tape& t, Var self) {
    auto gx = t.grad(x);
    const auto gy = t.grad(self);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (*mask)[i];
  });
}

Var lstm(Tape& tape, Var x, Var wx, Var wh, Var b, bool reverse, kernels::Activation activation) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "lstm input");
  const Tensor& wxv = tape.value(wx);
  expect_rank(wxv, 2, "lstm input weight");
  const std::size_t H = wxv.dim(0) / 4;
  const kernels::LstmShape s{xv.dim(0), xv.dim(1), xv.dim(2), H, reverse, activation};
  if (H == 0 || wxv.dim(0) != 4 * H || wxv.dim(1) != s.in_features || tape.value(wh).shape() != Shape{4 * H, H} ||
      tape.value(b).shape() != Shape{4 * H})
    throw ShapeError("lstm parameters do not fit input " + shape_string(xv.shape()));
  Tensor h({s.batch, s.time, H});
  auto cache = std::make_shared<kernels::LstmCache>();
  kernels::parallel::lstm_forward(s, xv.data(), wxv.data(), tape.value(wh).data(), tape.value(b).data(), h.data(),
                                  *cache);
  return tape.emit(std::move(h), {x, wx, wh, b}, [=](Tape& t, Var self) {
    std::vector<double> s1, s2, s3;
    kernels::parallel::lstm_backward(s, t.value(x).data(), t.value(wx).data(), t.value(wh).data(),
                                     t.value(self).data(), *cache, t.grad(self), t.grad(x),
                                     grad_or_scratch(t, wx, s1), grad_or_scratch(t, wh, s2),
                                     grad_or_scratch(t, b, s3));
  });
}

Var concat_features(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  expect_rank(av, 3, "concat input");
  expect_rank(bv, 3, "concat input");
  if (av.dim(0) != bv.dim(0) || av.dim(1) != bv.dim(1)) throw ShapeError("concat inputs differ in batch or time");
  const std::size_t rows = av.dim(0) * av.dim(1), fa = av.dim(2), fb = bv.dim(2);
  Tensor y({av.dim(0), av.dim(1), fa + fb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(r * fa), fa,
                y.data().begin() + static_cast<std::ptrdiff_t>(r * (fa + fb)));
    std::copy_n(bv.data().begin() + static_cast<std::ptrdiff_t>(r * fb), fb,
                y.data().begin() + static_cast<std::ptrdiff_t>(r * (fa + fb) + fa));
  }
  return tape.emit(std::move(y), {a, b}, [=](Tape& t, Var self) {
    const auto gy = t.grad(self);
    auto ga = t.grad(a);
    auto gb = t.grad(b);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < fa && !ga.empty(); ++i) ga[r * fa + i] += gy[r * (fa + fb) + i];
      for (std::size_t i = 0; i < fb && !gb.empty(); ++i) gb[r * fb + i] += gy[r * (fa + fb) + fa + i];
    }
  });
}

Var dense(Tape& tape, Var x, Var w, Var b) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  expect_rank(wv, 2, "dense weight");
  if (xv.rank() == 0 || xv.shape().back() != wv.dim(1) || tape.value(b).shape() != Shape{wv.dim(0)})
    throw ShapeError("dense weight " + shape_string(wv.shape()) + " does not fit input " + shape_string(xv.shape()));
  const kernels::DenseShape s{xv.size() / wv.dim(1), wv.dim(1), wv.dim(0)};
  Shape out_shape = xv.shape();
  out_shape.back() = s.out_features;
  Tensor y(out_shape);
  kernels::parallel::dense_forward(s, xv.data(), wv.data(), tape.value(b).data(), y.data());
  return tape.emit(std::move(y), {x, w, b}, [=](Tape& t, Var self) {
    std::vector<double> sw, sb;
    kernels::parallel::dense_backward(s, t.value(x).data(), t.value(w).data(), t.grad(self), t.grad(x),
                                      grad_or_scratch(t, w, sw), grad_or_scratch(t, b, sb));
  });
}

Var relu(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    y[i] = std::max(0.0, xv[i]);
    tape.note_kink_distance(std::abs(xv[i]));
  }
  return tape.emit(std::move(y), {x}, [=](Tape& t, Var self) {
    auto gx = t.grad(x);
    const auto gy = t.grad(self);
    const auto yv = t.value(self).data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += yv[i] > 0.0 ? gy[i] : 0.0;
  });
}

Var mean_over_time(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  expect_rank(xv, 3, "mean_over_time input");
  const std::size_t B = xv.dim(0), T = xv.dim(1), C = xv.dim(2);
  if (T == 0) throw ShapeError("mean over an empty time axis");
  const double inv_t = 1.0 / static_cast<double>(T);
  Tensor y({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) y[b * C + c] += inv_t * xv[(b * T + t) * C + c];
  return tape.emit(std::move(y), {x}, [=](Tape& tp, Var self) {
    auto gx = tp.grad(x);
    const auto gy = tp.grad(self);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < C; ++c) gx[(b * T + t) * C + c] += inv_t * gy[b * C + c];
  });
}

Var log_softmax(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() == 0 || xv.shape().back() == 0) throw ShapeError("log_softmax needs a non-empty last axis");
  const std::size_t K = xv.shape().back();
  const std::size_t rows = xv.size() / K;
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = xv[r * K];
    for (std::size_t k = 0; k < K; ++k) {
      if (!std::isfinite(xv[r * K + k])) throw ValueError("log_softmax input is not finite");
      mx = std::max(mx, xv[r * K + k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(xv[r * K + k] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t k = 0; k < K; ++k) y[r * K + k] = xv[r * K + k] - lse;
  }
  return tape.emit(std::move(y), {x}, [=](Tape& t, Var self) {
    auto gx = t.grad(x);
    const auto gy = t.grad(self);
    const auto yv = t.value(self).data();
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) sum += gy[r * K + k];
      for (std::size_t k = 0; k < K; ++k) gx[r * K + k] += gy[r * K + k] - std::exp(yv[r * K + k]) * sum;
    }
  });
}

}  // namespace imupen::nn
