#pragma once

// Data-parallel compute kernels behind the network layers, CTC batches and
// batch edit distances. Each kernel exists twice with identical signatures:
//
//   kernels::parallel   OpenMP, loop order chosen for contiguous access; every
//                       output element is reduced by exactly one thread in a
//                       fixed order, so results do not depend on thread count.
//   kernels::reference  plain serial loops written for readability; used as
//                       the test oracle and the benchmark baseline.
//
// Layouts are row-major. Backward kernels accumulate (+=) into gradient
// buffers so that shared parameters can be reused across calls.

#include <cstddef>
#include <span>
#include <vector>

#include "imupen/dataio.hpp"
#include "imupen/metrics.hpp"

namespace imupen::kernels {

struct ConvShape {
  std::size_t batch, time, in_channels, out_channels, kernel;
  std::size_t pad_left() const { return (kernel - 1) / 2; }
};

struct DenseShape {
  std::size_t rows, in_features, out_features;
};

enum class Activation { kTanh, kRelu };

struct LstmShape {
  std::size_t batch, time, in_features, hidden;
  bool reverse;
  Activation activation;
};

/// Saved forward state needed by lstm_backward: post-activation gates
/// (i, f, g, o) and cell states, both per (batch, time).
struct LstmCache {
  std::vector<double> gates;  // [B, T, 4H]
  std::vector<double> cells;  // [B, T, H]
};

struct CtcBatchResult {
  std::vector<double> values;       // per sequence; NaN when infeasible
  std::vector<double> grads;        // [B, T, C], zero rows for infeasible
  std::vector<unsigned char> feasible;
};

#define IMUPEN_KERNEL_DECLS                                                                                     \
  void conv1d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> w,                  \
                      std::span<const double> b, std::span<double> y);                                          \
  void conv1d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> w,                 \
                       std::span<const double> gy, std::span<double> gx, std::span<double> gw,                    \
                       std::span<double> gb);                                                                     \
  void dense_forward(const DenseShape& s, std::span<const double> x, std::span<const double> w,                  \
                     std::span<const double> b, std::span<double> y);                                           \
  void dense_backward(const DenseShape& s, std::span<const double> x, std::span<const double> w,                 \
                      std::span<const double> gy, std::span<double> gx, std::span<double> gw,                     \
                      std::span<double> gb);                                                                      \
  void lstm_forward(const LstmShape& s, std::span<const double> x, std::span<const double> wx,                   \
                    std::span<const double> wh, std::span<const double> b, std::span<double> h, LstmCache& cache); \
  void lstm_backward(const LstmShape& s, std::span<const double> x, std::span<const double> wx,                  \
                     std::span<const double> wh, std::span<const double> h, const LstmCache& cache,              \
                     std::span<const double> gh, std::span<double> gx, std::span<double> gwx,                    \
                     std::span<double> gwh, std::span<double> gb);                                               \
  CtcBatchResult ctc_batch(std::span<const double> log_probs, std::size_t batch, std::size_t time,              \
                           std::size_t classes, std::span<const Sequence> targets);                              \
  std::vector<EditScript> edit_scripts(std::span<const Sequence> references, std::span<const Sequence> hypotheses);

namespace parallel {
IMUPEN_KERNEL_DECLS
}  // namespace parallel

namespace reference {
IMUPEN_KERNEL_DECLS
}  // namespace reference

#undef IMUPEN_KERNEL_DECLS

}  // namespace imupen::kernels
