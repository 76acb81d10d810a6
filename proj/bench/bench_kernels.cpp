// Parallel kernels against their serial references, at sizes close to a
// training batch (50 sequences of 800 frames pooled to 400).
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "imupen/kernels.hpp"

namespace {

namespace k = imupen::kernels;

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.3);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

constexpr std::size_t kBatch = 50;

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  const k::ConvShape s{kBatch, 800, 13, 200, 5};
  const auto x = noise(s.batch * s.time * s.in_channels, 1);
  const auto w = noise(s.out_channels * s.in_channels * s.kernel, 2);
  const auto b = noise(s.out_channels, 3);
  std::vector<double> y(s.batch * s.time * s.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::conv1d_forward(s, x, w, b, y);
    else k::reference::conv1d_forward(s, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void dense_forward(benchmark::State& state) {
  const k::DenseShape s{kBatch * 400, 128, 16};
  const auto x = noise(s.rows * s.in_features, 1);
  const auto w = noise(s.in_features * s.out_features, 2);
  const auto b = noise(s.out_features, 3);
  std::vector<double> y(s.rows * s.out_features);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::dense_forward(s, x, w, b, y);
    else k::reference::dense_forward(s, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void lstm_round_trip(benchmark::State& state) {
  const k::LstmShape s{kBatch, 400, 200, 64, false, k::Activation::kTanh};
  const auto x = noise(s.batch * s.time * s.in_features, 1);
  const auto wx = noise(s.in_features * 4 * s.hidden, 2);
  const auto wh = noise(s.hidden * 4 * s.hidden, 3);
  const auto b = noise(4 * s.hidden, 4);
  const auto gh = noise(s.batch * s.time * s.hidden, 5);
  std::vector<double> h(s.batch * s.time * s.hidden), gx(x.size()), gwx(wx.size()), gwh(wh.size()), gb(b.size());
  k::LstmCache cache;
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::lstm_forward(s, x, wx, wh, b, h, cache);
      k::parallel::lstm_backward(s, x, wx, wh, h, cache, gh, gx, gwx, gwh, gb);
    } else {
      k::reference::lstm_forward(s, x, wx, wh, b, h, cache);
      k::reference::lstm_backward(s, x, wx, wh, h, cache, gh, gx, gwx, gwh, gb);
    }
    benchmark::DoNotOptimize(gx.data());
  }
}

template <bool Parallel>
void ctc(benchmark::State& state) {
  constexpr std::size_t time = 400, classes = 16;
  auto lp = noise(kBatch * time * classes, 1);
  for (std::size_t r = 0; r < kBatch * time; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(lp[r * classes + c]);
    for (std::size_t c = 0; c < classes; ++c) lp[r * classes + c] -= std::log(z);
  }
  std::mt19937_64 rng(7);
  std::vector<imupen::Sequence> targets(kBatch);
  for (auto& t : targets) {
    t.resize(20 + rng() % 20);
    for (auto& c : t) c = static_cast<int>(rng() % (classes - 1));
  }
  for (auto _ : state) {
    auto r = Parallel ? k::parallel::ctc_batch(lp, kBatch, time, classes, targets)
                      : k::reference::ctc_batch(lp, kBatch, time, classes, targets);
    benchmark::DoNotOptimize(r.grads.data());
  }
}

template <bool Parallel>
void edit_scripts(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::vector<imupen::Sequence> refs(2000), hyps(2000);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    refs[i].resize(30 + rng() % 30);
    hyps[i].resize(30 + rng() % 30);
    for (auto& c : refs[i]) c = static_cast<int>(rng() % 15);
    for (auto& c : hyps[i]) c = static_cast<int>(rng() % 15);
  }
  for (auto _ : state) {
    auto r = Parallel ? k::parallel::edit_scripts(refs, hyps) : k::reference::edit_scripts(refs, hyps);
    benchmark::DoNotOptimize(r.data());
  }
}

BENCHMARK(conv_forward<false>)->Name("conv1d_forward/reference")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(conv_forward<true>)->Name("conv1d_forward/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(dense_forward<false>)->Name("dense_forward/reference")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(dense_forward<true>)->Name("dense_forward/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(lstm_round_trip<false>)->Name("lstm_fwd_bwd/reference")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(lstm_round_trip<true>)->Name("lstm_fwd_bwd/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(ctc<false>)->Name("ctc_batch/reference")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(ctc<true>)->Name("ctc_batch/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(edit_scripts<false>)->Name("edit_scripts/reference")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(edit_scripts<true>)->Name("edit_scripts/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
