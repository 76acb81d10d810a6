#include "imupen/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>

#include "imupen/ctc.hpp"
#include "imupen/errors.hpp"
#include "imupen/layers.hpp"
#include "imupen/losses.hpp"
#include "imupen/model.hpp"
#include "imupen/rng.hpp"

namespace imupen {

using nn::Tape;
using nn::Tensor;
using nn::Var;

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double compare_gradient(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                        std::span<const double> analytic, double step, double floor) {
  if (analytic.size() != x.size()) throw ShapeError("analytic gradient size differs from the input");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * step), floor));
  }
  return worst;
}

namespace {

std::vector<double> normal(Rng& rng, std::size_t n, double sigma = 1.0) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// A layer case: input tensors and a graph over them. The checked objective
// is a fixed random projection of the graph output.
struct LayerCase {
  std::vector<Tensor> tensors;
  std::function<Var(Tape&, std::span<const Var>)> graph;
};

// Max relative error of one draw, and how close its inputs came to a kink.
struct Draw {
  double error = 0.0;
  double kink = std::numeric_limits<double>::infinity();
};

Draw check_layer(LayerCase c, Rng& rng, double step, double floor, std::size_t& entries) {
  std::vector<double> proj;
  Draw draw;
  const auto evaluate = [&](std::vector<Tensor>& ts, bool with_grad) {
    Tape tape;
    std::vector<Var> vars;
    for (auto& t : ts) vars.push_back(with_grad ? tape.parameter(t) : tape.input(t));
    const Var out = c.graph(tape, vars);
    const auto y = tape.value(out).data();
    if (proj.empty()) proj = normal(rng, y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    if (with_grad) {
      tape.backward(out, proj);
      draw.kink = tape.kink_distance();
    }
    return s;
  };

  for (auto& t : c.tensors) t.zero_grad();
  evaluate(c.tensors, true);

  double worst = 0.0;
  for (std::size_t k = 0; k < c.tensors.size(); ++k) {
    std::vector<double> analytic(c.tensors[k].grad().begin(), c.tensors[k].grad().end());
    std::vector<double> x0(c.tensors[k].data().begin(), c.tensors[k].data().end());
    const auto f = [&](std::span<const double> x) {
      std::vector<Tensor> ts;
      for (const auto& t : c.tensors) ts.emplace_back(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
      std::copy(x.begin(), x.end(), ts[k].data().begin());
      return evaluate(ts, false);
    };
    worst = std::max(worst, compare_gradient(f, x0, analytic, step, floor));
    entries += x0.size();
  }
  draw.error = worst;
  return draw;
}

Tensor random_tensor(Rng& rng, nn::Shape shape, double sigma = 1.0) {
  const std::size_t n = nn::numel(shape);
  return Tensor(std::move(shape), normal(rng, n, sigma));
}

LayerCase lstm_case(Rng& rng, bool reverse, kernels::Activation act) {
  const std::size_t B = 2, T = 3, C = 2, H = 2;
  return {{random_tensor(rng, {B, T, C}), random_tensor(rng, {4 * H, C}, 0.7), random_tensor(rng, {4 * H, H}, 0.7),
           random_tensor(rng, {4 * H}, 0.5)},
          [=](Tape& t, std::span<const Var> v) { return nn::lstm(t, v[0], v[1], v[2], v[3], reverse, act); }};
}

Draw check_model(Rng& rng, nn::Head head, std::uint64_t seed, double step, double floor, std::size_t& entries) {
  nn::ModelConfig cfg;
  cfg.conv_filters = 3;
  cfg.bilstm_units = 2;
  cfg.dense_units = 3;
  cfg.num_classes = 3;
  nn::Model model(cfg, head, 2, seed);
  const Tensor batch = random_tensor(rng, {2, 6, 2});
  std::vector<double> proj;
  Draw draw;
  const auto evaluate = [&](bool with_grad) {
    Tape tape;
    const auto out = model.forward(tape, batch, nn::Mode::kTrain, seed);
    const auto y = tape.value(out.log_probs).data();
    if (proj.empty()) proj = normal(rng, y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    if (with_grad) {
      tape.backward(out.log_probs, proj);
      draw.kink = tape.kink_distance();
    }
    return s;
  };
  model.zero_grad();
  evaluate(true);

  double worst = 0.0;
  for (auto& p : model.parameters()) {
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    std::vector<double> x0(p.tensor.data().begin(), p.tensor.data().end());
    const auto f = [&](std::span<const double> x) {
      std::copy(x.begin(), x.end(), p.tensor.data().begin());
      return evaluate(false);
    };
    worst = std::max(worst, compare_gradient(f, x0, analytic, step, floor));
    std::copy(x0.begin(), x0.end(), p.tensor.data().begin());
    entries += x0.size();
  }
  draw.error = worst;
  return draw;
}

double check_char_loss(CharLoss kind, Rng& rng, double step, double floor, std::size_t& entries) {
  const std::size_t B = kind == CharLoss::kJointOpt ? 3 : 1, K = 5;
  const auto logits = normal(rng, B * K, 1.5);
  std::vector<int> targets(B);
  std::uniform_int_distribution<int> cls(0, static_cast<int>(K) - 1);
  for (auto& t : targets) t = cls(rng);
  std::vector<double> prior;
  if (kind == CharLoss::kJointOpt) {
    prior = normal(rng, K);
    for (auto& v : prior) v = std::exp(v);
    double z = 0.0;
    for (double v : prior) z += v;
    for (auto& v : prior) v /= z;
  }
  const LossParams params;
  const auto out = char_loss(kind, logits, B, targets, params, prior);
  entries += logits.size();
  return compare_gradient(
      [&](std::span<const double> x) { return char_loss(kind, x, B, targets, params, prior).value; }, logits,
      out.grad_logits, step, floor);
}

double check_ctc(Rng& rng, double step, double floor, std::size_t& entries) {
  std::uniform_int_distribution<std::size_t> len(1, 3);
  const std::size_t K = 3, C = K + 1;
  Sequence target(len(rng));
  std::uniform_int_distribution<int> cls(0, static_cast<int>(K) - 1);
  for (auto& t : target) t = cls(rng);
  const std::size_t T = std::max<std::size_t>(ctc_min_frames(target), 4) + 2;
  std::vector<double> lp;
  for (std::size_t t = 0; t < T; ++t) {
    const auto row = log_softmax(normal(rng, C));
    lp.insert(lp.end(), row.begin(), row.end());
  }
  const auto out = ctc_loss(lp, T, target);
  entries += lp.size();
  return compare_gradient([&](std::span<const double> x) { return ctc_loss(x, T, target).value; }, lp,
                          out.grad_logits, step, floor);
}

std::optional<CharLoss> char_loss_named(std::string_view name) {
  for (auto k : all_char_losses())
    if (to_string(k) == name) return k;
  return std::nullopt;
}

LayerCase layer_case(std::string_view name, Rng& rng, std::uint64_t seed) {
  using kernels::Activation;
  if (name == "conv1d")
    return {{random_tensor(rng, {2, 5, 3}), random_tensor(rng, {4, 3, 4}), random_tensor(rng, {4})},
            [](Tape& t, std::span<const Var> v) { return nn::conv1d(t, v[0], v[1], v[2]); }};
  if (name == "maxpool1d")
    return {{random_tensor(rng, {2, 7, 3})}, [](Tape& t, std::span<const Var> v) { return nn::maxpool1d(t, v[0], 2); }};
  if (name == "batchnorm1d") {
    auto state = std::make_shared<nn::BatchNormState>();
    return {{random_tensor(rng, {2, 4, 3}), random_tensor(rng, {3}), random_tensor(rng, {3})},
            [state](Tape& t, std::span<const Var> v) {
              return nn::batchnorm1d(t, v[0], v[1], v[2], *state, nn::Mode::kTrain, 0.1, 1e-5);
            }};
  }
  if (name == "dropout")
    return {{random_tensor(rng, {2, 5, 3})},
            [seed](Tape& t, std::span<const Var> v) { return nn::dropout(t, v[0], 0.2, nn::Mode::kTrain, seed); }};
  if (name == "lstm") return lstm_case(rng, false, Activation::kTanh);
  if (name == "lstm.reverse") return lstm_case(rng, true, Activation::kTanh);
  if (name == "lstm.relu") return lstm_case(rng, false, Activation::kRelu);
  if (name == "concat_features")
    return {{random_tensor(rng, {2, 3, 2}), random_tensor(rng, {2, 3, 3})},
            [](Tape& t, std::span<const Var> v) { return nn::concat_features(t, v[0], v[1]); }};
  if (name == "dense")
    return {{random_tensor(rng, {2, 3, 4}), random_tensor(rng, {5, 4}), random_tensor(rng, {5})},
            [](Tape& t, std::span<const Var> v) { return nn::dense(t, v[0], v[1], v[2]); }};
  if (name == "relu")
    return {{random_tensor(rng, {2, 3, 4})}, [](Tape& t, std::span<const Var> v) { return nn::relu(t, v[0]); }};
  if (name == "mean_over_time")
    return {{random_tensor(rng, {2, 5, 3})},
            [](Tape& t, std::span<const Var> v) { return nn::mean_over_time(t, v[0]); }};
  if (name == "log_softmax")
    return {{random_tensor(rng, {2, 3, 4})}, [](Tape& t, std::span<const Var> v) { return nn::log_softmax(t, v[0]); }};
  throw ArgumentError("no gradient check named '" + std::string(name) + "'");
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (auto k : all_char_losses()) names.push_back(to_string(k));
  for (const char* n : {"ctc", "conv1d", "maxpool1d", "batchnorm1d", "dropout", "lstm", "lstm.reverse", "lstm.relu",
                        "concat_features", "dense", "relu", "mean_over_time", "log_softmax", "model.sequence",
                        "model.character"})
    names.emplace_back(n);
  return names;
}

}  // namespace imupen

namespace imupen {

GradCheckResult gradcheck(std::string_view name, const GradCheckOptions& opts) {
  const auto names = gradcheck_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ArgumentError("no gradient check named '" + std::string(name) + "'");
  GradCheckResult r;
  r.name = std::string(name);
  const auto name_key = static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
  constexpr std::size_t kMaxAttempts = 64;
  for (std::size_t d = 0; d < opts.draws; ++d) {
    Draw draw;
    for (std::size_t attempt = 0;; ++attempt) {
      Rng rng = attempt == 0 ? make_rng(opts.seed, {name_key, d}) : make_rng(opts.seed, {name_key, d, 2, attempt});
      const auto seed = derive_seed(opts.seed, {name_key, d, 1, attempt});
      std::size_t entries = 0;
      if (name == "ctc") {
        draw.error = check_ctc(rng, opts.step, opts.floor, entries);
      } else if (name == "model.sequence") {
        draw = check_model(rng, nn::Head::kSequence, seed, opts.step, opts.floor, entries);
      } else if (name == "model.character") {
        draw = check_model(rng, nn::Head::kCharacter, seed, opts.step, opts.floor, entries);
      } else if (const auto loss = char_loss_named(name)) {
        draw.error = check_char_loss(*loss, rng, opts.step, opts.floor, entries);
      } else {
        draw = check_layer(layer_case(name, rng, seed), rng, opts.step, opts.floor, entries);
      }
      if (draw.kink >= opts.kink_margin || attempt + 1 == kMaxAttempts) {
        r.entries += entries;
        break;
      }
      ++r.redraws;
    }
    r.max_rel_error = std::max(r.max_rel_error, draw.error);
    ++r.draws;
  }
  return r;
}

std::vector<GradCheckResult> gradcheck_all(const GradCheckOptions& opts) {
  std::vector<GradCheckResult> out;
  for (const auto& n : gradcheck_names()) out.push_back(gradcheck(n, opts));
  return out;
}

}  // namespace imupen
