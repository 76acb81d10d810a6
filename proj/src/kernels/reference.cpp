#include <cmath>
#include <cstddef>
#include <limits>

#include "imupen/ctc.hpp"
#include "imupen/errors.hpp"
#include "imupen/kernels.hpp"

namespace imupen::kernels::reference {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double act(Activation a, double x) {
  if (a == Activation::kTanh) return std::tanh(x);
  return x > 0.0 ? x : 0.0;
}

double act_deriv_at(Activation a, double pre) {
  if (a == Activation::kTanh) {
    const double y = std::tanh(pre);
    return 1.0 - y * y;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}

// Time index of the step-th element of the recurrence.
std::size_t time_at(const LstmShape& s, std::size_t step) { return s.reverse ? s.time - 1 - step : step; }

}  // namespace

void conv1d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const auto pad = static_cast<long>(s.pad_left());
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t t = 0; t < s.time; ++t) {
        double acc = b[o];
        for (std::size_t i = 0; i < s.in_channels; ++i)
          for (std::size_t j = 0; j < s.kernel; ++j) {
            const long src = static_cast<long>(t + j) - pad;
            if (src < 0 || src >= static_cast<long>(s.time)) continue;
            acc += w[(o * s.in_channels + i) * s.kernel + j] *
                   x[(n * s.time + static_cast<std::size_t>(src)) * s.in_channels + i];
          }
        y[(n * s.time + t) * s.out_channels + o] = acc;
      }
}

void conv1d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> gy, std::span<double> gx, std::span<double> gw, std::span<double> gb) {
  const auto pad = static_cast<long>(s.pad_left());
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::size_t t = 0; t < s.time; ++t) {
        const double g = gy[(n * s.time + t) * s.out_channels + o];
        gb[o] += g;
        for (std::size_t i = 0; i < s.in_channels; ++i)
          for (std::size_t j = 0; j < s.kernel; ++j) {
            const long src = static_cast<long>(t + j) - pad;
            if (src < 0 || src >= static_cast<long>(s.time)) continue;
            const std::size_t xi = (n * s.time + static_cast<std::size_t>(src)) * s.in_channels + i;
            const std::size_t wi = (o * s.in_channels + i) * s.kernel + j;
            gw[wi] += g * x[xi];
            if (!gx.empty()) gx[xi] += g * w[wi];
          }
      }
}

void dense_forward(const DenseShape& s, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  for (std::size_t n = 0; n < s.rows; ++n)
    for (std::size_t o = 0; o < s.out_features; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < s.in_features; ++i) acc += w[o * s.in_features + i] * x[n * s.in_features + i];
      y[n * s.out_features + o] = acc;
    }
}

void dense_backward(const DenseShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx, std::span<double> gw, std::span<double> gb) {
  for (std::size_t n = 0; n < s.rows; ++n)
    for (std::size_t o = 0; o < s.out_features; ++o) {
      const double g = gy[n * s.out_features + o];
      gb[o] += g;
      for (std::size_t i = 0; i < s.in_features; ++i) {
        gw[o * s.in_features + i] += g * x[n * s.in_features + i];
        if (!gx.empty()) gx[n * s.in_features + i] += g * w[o * s.in_features + i];
      }
    }
}

void lstm_forward(const LstmShape& s, std::span<const double> x, std::span<const double> wx,
                  std::span<const double> wh, std::span<const double> b, std::span<double> h, LstmCache& cache) {
  const std::size_t H = s.hidden, C = s.in_features;
  cache.gates.assign(s.batch * s.time * 4 * H, 0.0);
  cache.cells.assign(s.batch * s.time * H, 0.0);
  for (std::size_t n = 0; n < s.batch; ++n) {
    std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0);
    for (std::size_t step = 0; step < s.time; ++step) {
      const std::size_t t = time_at(s, step);
      const std::size_t row = n * s.time + t;
      std::vector<double> pre(4 * H);
      for (std::size_t g = 0; g < 4 * H; ++g) {
        pre[g] = b[g];
        for (std::size_t i = 0; i < C; ++i) pre[g] += wx[g * C + i] * x[row * C + i];
        for (std::size_t i = 0; i < H; ++i) pre[g] += wh[g * H + i] * h_prev[i];
      }
      for (std::size_t u = 0; u < H; ++u) {
        const double in_gate = sigmoid(pre[u]);
        const double forget_gate = sigmoid(pre[H + u]);
        const double cand = act(s.activation, pre[2 * H + u]);
        const double out_gate = sigmoid(pre[3 * H + u]);
        const double cell = forget_gate * c_prev[u] + in_gate * cand;
        cache.gates[row * 4 * H + u] = in_gate;
        cache.gates[row * 4 * H + H + u] = forget_gate;
        cache.gates[row * 4 * H + 2 * H + u] = cand;
        cache.gates[row * 4 * H + 3 * H + u] = out_gate;
        cache.cells[row * H + u] = cell;
        h[row * H + u] = out_gate * act(s.activation, cell);
      }
      for (std::size_t u = 0; u < H; ++u) {
        h_prev[u] = h[row * H + u];
        c_prev[u] = cache.cells[row * H + u];
      }
    }
  }
}

void lstm_backward(const LstmShape& s, std::span<const double> x, std::span<const double> wx,
                   std::span<const double> wh, std::span<const double> h, const LstmCache& cache,
                   std::span<const double> gh, std::span<double> gx, std::span<double> gwx, std::span<double> gwh,
                   std::span<double> gb) {
  const std::size_t H = s.hidden, C = s.in_features;
  for (std::size_t n = 0; n < s.batch; ++n) {
    std::vector<double> dh_carry(H, 0.0), dc_carry(H, 0.0);
    for (std::size_t step = s.time; step-- > 0;) {
      const std::size_t t = time_at(s, step);
      const std::size_t row = n * s.time + t;
      const bool has_prev = step > 0;
      const std::size_t prev_row = has_prev ? n * s.time + time_at(s, step - 1) : 0;
      std::vector<double> d_pre(4 * H);
      for (std::size_t u = 0; u < H; ++u) {
        const double in_gate = cache.gates[row * 4 * H + u];
        const double forget_gate = cache.gates[row * 4 * H + H + u];
        const double cand = cache.gates[row * 4 * H + 2 * H + u];
        const double out_gate = cache.gates[row * 4 * H + 3 * H + u];
        const double cell = cache.cells[row * H + u];
        const double cell_prev = has_prev ? cache.cells[prev_row * H + u] : 0.0;
        const double dh = gh[row * H + u] + dh_carry[u];
        const double dcell = dh * out_gate * act_deriv_at(s.activation, cell) + dc_carry[u];
        // For tanh the candidate derivative is 1 - cand^2; relu: cand > 0.
        const double cand_deriv = s.activation == Activation::kTanh ? 1.0 - cand * cand : (cand > 0.0 ? 1.0 : 0.0);
        d_pre[u] = dcell * cand * in_gate * (1.0 - in_gate);
        d_pre[H + u] = dcell * cell_prev * forget_gate * (1.0 - forget_gate);
        d_pre[2 * H + u] = dcell * in_gate * cand_deriv;
        d_pre[3 * H + u] = dh * act(s.activation, cell) * out_gate * (1.0 - out_gate);
        dc_carry[u] = dcell * forget_gate;
      }
      for (std::size_t u = 0; u < H; ++u) dh_carry[u] = 0.0;
      for (std::size_t g = 0; g < 4 * H; ++g) {
        gb[g] += d_pre[g];
        for (std::size_t i = 0; i < C; ++i) {
          gwx[g * C + i] += d_pre[g] * x[row * C + i];
          if (!gx.empty()) gx[row * C + i] += d_pre[g] * wx[g * C + i];
        }
        if (!has_prev) continue;
        for (std::size_t i = 0; i < H; ++i) {
          gwh[g * H + i] += d_pre[g] * h[prev_row * H + i];
          dh_carry[i] += d_pre[g] * wh[g * H + i];
        }
      }
    }
  }
}

CtcBatchResult ctc_batch(std::span<const double> log_probs, std::size_t batch, std::size_t time, std::size_t classes,
                         std::span<const Sequence> targets) {
  if (log_probs.size() != batch * time * classes || targets.size() != batch)
    throw ShapeError("CTC batch shape mismatch");
  CtcBatchResult res{std::vector<double>(batch, std::numeric_limits<double>::quiet_NaN()),
                     std::vector<double>(log_probs.size(), 0.0), std::vector<unsigned char>(batch, 0)};
  const std::size_t stride = time * classes;
  for (std::size_t b = 0; b < batch; ++b) {
    if (ctc_min_frames(targets[b]) > time) continue;
    const auto out = ctc_loss(log_probs.subspan(b * stride, stride), time, targets[b]);
    res.values[b] = out.value;
    for (std::size_t e = 0; e < stride; ++e) res.grads[b * stride + e] = out.grad_logits[e];
    res.feasible[b] = 1;
  }
  return res;
}

std::vector<EditScript> edit_scripts(std::span<const Sequence> references, std::span<const Sequence> hypotheses) {
  if (references.size() != hypotheses.size()) throw ArgumentError("reference and hypothesis counts differ");
  std::vector<EditScript> out;
  out.reserve(references.size());
  for (std::size_t i = 0; i < references.size(); ++i) out.push_back(edit_distance(references[i], hypotheses[i]));
  return out;
}

}  // namespace imupen::kernels::reference
