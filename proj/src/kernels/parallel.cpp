#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>

#include "imupen/ctc.hpp"
#include "imupen/errors.hpp"
#include "imupen/kernels.hpp"

namespace imupen::kernels::parallel {
namespace {

using Index = std::ptrdiff_t;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double activate(Activation a, double x) { return a == Activation::kTanh ? std::tanh(x) : std::max(0.0, x); }

// Derivative expressed through the activation's output.
inline double activate_grad(Activation a, double y) { return a == Activation::kTanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0); }

}  // namespace

void conv1d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const Index rows = static_cast<Index>(s.batch * s.time);
  const std::size_t ci = s.in_channels, co = s.out_channels, k = s.kernel, pad = s.pad_left();
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    const std::size_t bi = static_cast<std::size_t>(r) / s.time;
    const std::size_t t = static_cast<std::size_t>(r) % s.time;
    double* out = y.data() + static_cast<std::size_t>(r) * co;
    for (std::size_t o = 0; o < co; ++o) out[o] = b[o];
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(s.time)) continue;
      const double* in = x.data() + (bi * s.time + static_cast<std::size_t>(src)) * ci;
      for (std::size_t o = 0; o < co; ++o) {
        const double* wo = w.data() + o * ci * k + j;
        double acc = 0.0;
        for (std::size_t i = 0; i < ci; ++i) acc += wo[i * k] * in[i];
        out[o] += acc;
      }
    }
  }
}

void conv1d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> gy, std::span<double> gx, std::span<double> gw, std::span<double> gb) {
  const std::size_t ci = s.in_channels, co = s.out_channels, k = s.kernel, pad = s.pad_left();
  const auto T = static_cast<std::ptrdiff_t>(s.time);
  if (!gx.empty()) {
    const Index rows = static_cast<Index>(s.batch * s.time);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
      const std::size_t bi = static_cast<std::size_t>(r) / s.time;
      const auto src = static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) % s.time);
      double* g = gx.data() + static_cast<std::size_t>(r) * ci;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t t = src - static_cast<std::ptrdiff_t>(j) + static_cast<std::ptrdiff_t>(pad);
        if (t < 0 || t >= T) continue;
        const double* go = gy.data() + (bi * s.time + static_cast<std::size_t>(t)) * co;
        for (std::size_t i = 0; i < ci; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < co; ++o) acc += w[o * ci * k + i * k + j] * go[o];
          g[i] += acc;
        }
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (Index oi = 0; oi < static_cast<Index>(co); ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    double bias_acc = 0.0;
    for (std::size_t bi = 0; bi < s.batch; ++bi) {
      for (std::size_t t = 0; t < s.time; ++t) bias_acc += gy[(bi * s.time + t) * co + o];
    }
    gb[o] += bias_acc;
    for (std::size_t i = 0; i < ci; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t bi = 0; bi < s.batch; ++bi) {
          for (std::size_t t = 0; t < s.time; ++t) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= T) continue;
            acc += gy[(bi * s.time + t) * co + o] * x[(bi * s.time + static_cast<std::size_t>(src)) * ci + i];
          }
        }
        gw[o * ci * k + i * k + j] += acc;
      }
    }
  }
}

void dense_forward(const DenseShape& s, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y) {
  const std::size_t ci = s.in_features, co = s.out_features;
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < static_cast<Index>(s.rows); ++n) {
    const double* in = x.data() + static_cast<std::size_t>(n) * ci;
    double* out = y.data() + static_cast<std::size_t>(n) * co;
    for (std::size_t o = 0; o < co; ++o) {
      const double* wo = w.data() + o * ci;
      double acc = b[o];
      for (std::size_t i = 0; i < ci; ++i) acc += wo[i] * in[i];
      out[o] = acc;
    }
  }
}

void dense_backward(const DenseShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx, std::span<double> gw, std::span<double> gb) {
  const std::size_t ci = s.in_features, co = s.out_features;
  if (!gx.empty()) {
#pragma omp parallel for schedule(static)
    for (Index n = 0; n < static_cast<Index>(s.rows); ++n) {
      const double* go = gy.data() + static_cast<std::size_t>(n) * co;
      double* g = gx.data() + static_cast<std::size_t>(n) * ci;
      for (std::size_t o = 0; o < co; ++o) {
        const double* wo = w.data() + o * ci;
        for (std::size_t i = 0; i < ci; ++i) g[i] += wo[i] * go[o];
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (Index oi = 0; oi < static_cast<Index>(co); ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    double* g = gw.data() + o * ci;
    double bias_acc = 0.0;
    for (std::size_t n = 0; n < s.rows; ++n) {
      const double go = gy[n * co + o];
      const double* in = x.data() + n * ci;
      bias_acc += go;
      for (std::size_t i = 0; i < ci; ++i) g[i] += go * in[i];
    }
    gb[o] += bias_acc;
  }
}

void lstm_forward(const LstmShape& s, std::span<const double> x, std::span<const double> wx,
                  std::span<const double> wh, std::span<const double> b, std::span<double> h, LstmCache& cache) {
  const std::size_t C = s.in_features, H = s.hidden, G = 4 * H, T = s.time;
  cache.gates.assign(s.batch * T * G, 0.0);
  cache.cells.assign(s.batch * T * H, 0.0);
#pragma omp parallel for schedule(static)
  for (Index bi = 0; bi < static_cast<Index>(s.batch); ++bi) {
    const std::size_t base = static_cast<std::size_t>(bi) * T;
    std::vector<double> a(G);
    const double* h_prev = nullptr;
    const double* c_prev = nullptr;
    for (std::size_t step = 0; step < T; ++step) {
      const std::size_t t = s.reverse ? T - 1 - step : step;
      const double* xt = x.data() + (base + t) * C;
      for (std::size_t g = 0; g < G; ++g) {
        double acc = b[g];
        const double* wxg = wx.data() + g * C;
        for (std::size_t i = 0; i < C; ++i) acc += wxg[i] * xt[i];
        if (h_prev) {
          const double* whg = wh.data() + g * H;
          for (std::size_t i = 0; i < H; ++i) acc += whg[i] * h_prev[i];
        }
        a[g] = acc;
      }
      double* gates = cache.gates.data() + (base + t) * G;
      double* c = cache.cells.data() + (base + t) * H;
      double* ht = h.data() + (base + t) * H;
      for (std::size_t u = 0; u < H; ++u) {
        const double ig = sigmoid(a[u]);
        const double fg = sigmoid(a[H + u]);
        const double gg = activate(s.activation, a[2 * H + u]);
        const double og = sigmoid(a[3 * H + u]);
        gates[u] = ig;
        gates[H + u] = fg;
        gates[2 * H + u] = gg;
        gates[3 * H + u] = og;
        c[u] = (c_prev ? fg * c_prev[u] : 0.0) + ig * gg;
        ht[u] = og * activate(s.activation, c[u]);
      }
      h_prev = ht;
      c_prev = c;
    }
  }
}

void lstm_backward(const LstmShape& s, std::span<const double> x, std::span<const double> wx,
                   std::span<const double> wh, std::span<const double> h, const LstmCache& cache,
                   std::span<const double> gh, std::span<double> gx, std::span<double> gwx, std::span<double> gwh,
                   std::span<double> gb) {
  const std::size_t C = s.in_features, H = s.hidden, G = 4 * H, T = s.time, B = s.batch;
  // Per-sequence parameter gradients, reduced below in batch order.
  std::vector<double> pwx(B * G * C, 0.0), pwh(B * G * H, 0.0), pb(B * G, 0.0);
#pragma omp parallel for schedule(static)
  for (Index bi = 0; bi < static_cast<Index>(B); ++bi) {
    const auto bu = static_cast<std::size_t>(bi);
    const std::size_t base = bu * T;
    double* my_wx = pwx.data() + bu * G * C;
    double* my_wh = pwh.data() + bu * G * H;
    double* my_b = pb.data() + bu * G;
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), da(G);
    for (std::size_t step = T; step-- > 0;) {
      const std::size_t t = s.reverse ? T - 1 - step : step;
      const bool first = step == 0;
      const std::size_t t_prev = s.reverse ? t + 1 : t - 1;
      const double* gates = cache.gates.data() + (base + t) * G;
      const double* c = cache.cells.data() + (base + t) * H;
      const double* c_prev = first ? nullptr : cache.cells.data() + (base + t_prev) * H;
      const double* h_prev = first ? nullptr : h.data() + (base + t_prev) * H;
      for (std::size_t u = 0; u < H; ++u) {
        const double ig = gates[u], fg = gates[H + u], gg = gates[2 * H + u], og = gates[3 * H + u];
        const double dh = gh[(base + t) * H + u] + dh_next[u];
        const double act_c = activate(s.activation, c[u]);
        const double dc = dh * og * activate_grad(s.activation, act_c) + dc_next[u];
        da[u] = dc * gg * ig * (1.0 - ig);
        da[H + u] = (c_prev ? dc * c_prev[u] : 0.0) * fg * (1.0 - fg);
        da[2 * H + u] = dc * ig * activate_grad(s.activation, gg);
        da[3 * H + u] = dh * act_c * og * (1.0 - og);
        dc_next[u] = dc * fg;
      }
      const double* xt = x.data() + (base + t) * C;
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      double* gxt = gx.empty() ? nullptr : gx.data() + (base + t) * C;
      for (std::size_t g = 0; g < G; ++g) {
        const double d = da[g];
        my_b[g] += d;
        const double* wxg = wx.data() + g * C;
        double* gwxg = my_wx + g * C;
        for (std::size_t i = 0; i < C; ++i) {
          gwxg[i] += d * xt[i];
          if (gxt) gxt[i] += wxg[i] * d;
        }
        if (h_prev) {
          const double* whg = wh.data() + g * H;
          double* gwhg = my_wh + g * H;
          for (std::size_t i = 0; i < H; ++i) {
            gwhg[i] += d * h_prev[i];
            dh_next[i] += whg[i] * d;
          }
        }
      }
    }
  }
  const auto reduce = [B](const std::vector<double>& parts, std::span<double> dst) {
    const std::size_t n = dst.size();
#pragma omp parallel for schedule(static)
    for (Index e = 0; e < static_cast<Index>(n); ++e) {
      double acc = 0.0;
      for (std::size_t bi = 0; bi < B; ++bi) acc += parts[bi * n + static_cast<std::size_t>(e)];
      dst[static_cast<std::size_t>(e)] += acc;
    }
  };
  reduce(pwx, gwx);
  reduce(pwh, gwh);
  reduce(pb, gb);
}

CtcBatchResult ctc_batch(std::span<const double> log_probs, std::size_t batch, std::size_t time, std::size_t classes,
                         std::span<const Sequence> targets) {
  if (log_probs.size() != batch * time * classes || targets.size() != batch)
    throw ShapeError("CTC batch shape mismatch");
  CtcBatchResult res{std::vector<double>(batch, std::numeric_limits<double>::quiet_NaN()),
                     std::vector<double>(log_probs.size(), 0.0), std::vector<unsigned char>(batch, 0)};
  std::vector<std::exception_ptr> errors(batch);
  const std::size_t stride = time * classes;
#pragma omp parallel for schedule(dynamic)
  for (Index bi = 0; bi < static_cast<Index>(batch); ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    try {
      if (ctc_min_frames(targets[b]) > time) continue;
      auto out = ctc_loss(log_probs.subspan(b * stride, stride), time, targets[b]);
      res.values[b] = out.value;
      std::copy(out.grad_logits.begin(), out.grad_logits.end(), res.grads.begin() + static_cast<Index>(b * stride));
      res.feasible[b] = 1;
    } catch (...) {
      errors[b] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return res;
}

std::vector<EditScript> edit_scripts(std::span<const Sequence> references, std::span<const Sequence> hypotheses) {
  if (references.size() != hypotheses.size()) throw ArgumentError("reference and hypothesis counts differ");
  std::vector<EditScript> out(references.size());
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < static_cast<Index>(references.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    out[u] = edit_distance(references[u], hypotheses[u]);
  }
  return out;
}

}  // namespace imupen::kernels::parallel
