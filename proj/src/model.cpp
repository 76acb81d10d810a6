#include "imupen/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "imupen/errors.hpp"
#include "imupen/rng.hpp"

namespace imupen::nn {

std::string to_string(RecurrentKind k) { return k == RecurrentKind::kLstm ? "lstm" : "bilstm"; }

RecurrentKind parse_recurrent_kind(std::string_view s) {
  if (s == "lstm" || s == "LSTM") return RecurrentKind::kLstm;
  if (s == "bilstm" || s == "BiLSTM") return RecurrentKind::kBiLstm;
  throw ArgumentError("recurrent kind must be lstm or bilstm, got '" + std::string(s) + "'");
}

std::string to_string(Head h) { return h == Head::kSequence ? "sequence" : "character"; }

Head parse_head(std::string_view s) {
  if (s == "sequence") return Head::kSequence;
  if (s == "character") return Head::kCharacter;
  throw ArgumentError("head must be sequence or character, got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (conv_filters == 0 || conv_kernel == 0 || pool_size == 0 || lstm_units == 0 || bilstm_units == 0 ||
      bilstm_layers == 0 || dense_units == 0 || num_classes == 0)
    throw ArgumentError("model sizes must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError("dropout_rate must lie in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0) || !(bn_eps > 0.0))
    throw ArgumentError("batch norm momentum must lie in (0, 1] and eps be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"conv_filters", c.conv_filters},
                     {"conv_kernel", c.conv_kernel},
                     {"pool_size", c.pool_size},
                     {"dropout_rate", c.dropout_rate},
                     {"recurrent_kind", to_string(c.recurrent_kind)},
                     {"lstm_units", c.lstm_units},
                     {"lstm_activation", c.lstm_activation == kernels::Activation::kRelu ? "relu" : "tanh"},
                     {"bilstm_units", c.bilstm_units},
                     {"bilstm_layers", c.bilstm_layers},
                     {"dense_units", c.dense_units},
                     {"num_classes", c.num_classes},
                     {"use_batchnorm", c.use_batchnorm},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_eps", c.bn_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  c.conv_filters = j.value("conv_filters", d.conv_filters);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
  c.pool_size = j.value("pool_size", d.pool_size);
  c.dropout_rate = j.value("dropout_rate", d.dropout_rate);
  c.recurrent_kind = parse_recurrent_kind(j.value("recurrent_kind", to_string(d.recurrent_kind)));
  c.lstm_units = j.value("lstm_units", d.lstm_units);
  const std::string act = j.value("lstm_activation", std::string("relu"));
  if (act != "relu" && act != "tanh") throw ArgumentError("lstm_activation must be relu or tanh");
  c.lstm_activation = act == "relu" ? kernels::Activation::kRelu : kernels::Activation::kTanh;
  c.bilstm_units = j.value("bilstm_units", d.bilstm_units);
  c.bilstm_layers = j.value("bilstm_layers", d.bilstm_layers);
  c.dense_units = j.value("dense_units", d.dense_units);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.use_batchnorm = j.value("use_batchnorm", d.use_batchnorm);
  c.bn_momentum = j.value("bn_momentum", d.bn_momentum);
  c.bn_eps = j.value("bn_eps", d.bn_eps);
}

std::size_t Model::add(std::string name, Shape shape) {
  params_.push_back({std::move(name), Tensor(std::move(shape))});
  return params_.size() - 1;
}

Model::Model(const ModelConfig& cfg, Head head, std::size_t input_channels, std::uint64_t seed)
    : cfg_(cfg), head_(head), input_channels_(input_channels) {
  cfg_.validate();
  if (input_channels == 0) throw ArgumentError("model needs at least one input channel");
  const std::size_t F = cfg_.conv_filters;
  conv_w_ = add("conv.weight", {F, input_channels, cfg_.conv_kernel});
  conv_b_ = add("conv.bias", {F});
  if (cfg_.use_batchnorm) {
    bn_gamma_ = add("bn.gamma", {F});
    bn_beta_ = add("bn.beta", {F});
    for (auto& g : at(bn_gamma_).data()) g = 1.0;
  }

  std::size_t features = F;
  const bool bidir = cfg_.recurrent_kind == RecurrentKind::kBiLstm;
  const std::size_t layers = bidir ? cfg_.bilstm_layers : 1;
  const std::size_t H = bidir ? cfg_.bilstm_units : cfg_.lstm_units;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<RecurrentParams> dirs;
    for (bool reverse : bidir ? std::vector<bool>{false, true} : std::vector<bool>{false}) {
      const std::string prefix = "rnn.l" + std::to_string(l) + (reverse ? ".bwd" : ".fwd");
      RecurrentParams p{};
      p.wx = add(prefix + ".w_input", {4 * H, features});
      p.wh = add(prefix + ".w_hidden", {4 * H, H});
      p.b = add(prefix + ".bias", {4 * H});
      p.reverse = reverse;
      dirs.push_back(p);
    }
    layers_.push_back(std::move(dirs));
    features = bidir ? 2 * H : H;
  }

  if (head_ == Head::kCharacter) {
    hidden_w_ = add("head.hidden.weight", {cfg_.dense_units, features});
    hidden_b_ = add("head.hidden.bias", {cfg_.dense_units});
    features = cfg_.dense_units;
  }
  out_w_ = add("head.out.weight", {output_classes(), features});
  out_b_ = add("head.out.bias", {output_classes()});

  // Uniform(+-sqrt(6/(fan_in+fan_out))) for conv/dense, uniform(+-1/sqrt(H))
  // for recurrent weights, forget-gate bias 1, other biases 0.
  Rng rng = make_rng(seed, {0x1417});
  const auto fill = [&](Tensor& t, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.data()) v = dist(rng);
  };
  fill(at(conv_w_), std::sqrt(6.0 / static_cast<double>((input_channels + F) * cfg_.conv_kernel)));
  for (auto& dirs : layers_) {
    for (auto& p : dirs) {
      const double limit = 1.0 / std::sqrt(static_cast<double>(H));
      fill(at(p.wx), limit);
      fill(at(p.wh), limit);
      for (std::size_t u = 0; u < H; ++u) at(p.b).data()[H + u] = 1.0;
    }
  }
  const auto glorot = [&](std::size_t idx) {
    const auto& s = at(idx).shape();
    fill(at(idx), std::sqrt(6.0 / static_cast<double>(s[0] + s[1])));
  };
  if (head_ == Head::kCharacter) glorot(hidden_w_);
  glorot(out_w_);
}

Parameter& Model::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ArgumentError("model has no parameter '" + std::string(name) + "'");
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Model::Output Model::forward(Tape& tape, const Tensor& batch, Mode mode, std::uint64_t dropout_seed) {
  if (batch.rank() != 3 || batch.dim(2) != input_channels_)
    throw ShapeError("model expects [batch, time, " + std::to_string(input_channels_) + "], got " +
                     shape_string(batch.shape()));
  Var x = tape.input(batch);
  x = conv1d(tape, x, tape.parameter(at(conv_w_)), tape.parameter(at(conv_b_)));
  x = maxpool1d(tape, x, cfg_.pool_size);
  if (cfg_.use_batchnorm) {
    x = batchnorm1d(tape, x, tape.parameter(at(bn_gamma_)), tape.parameter(at(bn_beta_)), bn_, mode,
                    cfg_.bn_momentum, cfg_.bn_eps);
  }
  x = dropout(tape, x, cfg_.dropout_rate, mode, dropout_seed);

  const auto act = cfg_.recurrent_kind == RecurrentKind::kBiLstm ? kernels::Activation::kTanh : cfg_.lstm_activation;
  for (auto& dirs : layers_) {
    std::vector<Var> outs;
    for (auto& p : dirs)
      outs.push_back(lstm(tape, x, tape.parameter(at(p.wx)), tape.parameter(at(p.wh)), tape.parameter(at(p.b)),
                          p.reverse, act));
    x = outs.size() == 1 ? outs[0] : concat_features(tape, outs[0], outs[1]);
  }

  if (head_ == Head::kCharacter) {
    x = mean_over_time(tape, x);
    x = relu(tape, dense(tape, x, tape.parameter(at(hidden_w_)), tape.parameter(at(hidden_b_))));
  }
  Var logits = dense(tape, x, tape.parameter(at(out_w_)), tape.parameter(at(out_b_)));
  return {logits, log_softmax(tape, logits)};
}

Tensor stack_samples(std::span<const Sample* const> samples) {
  if (samples.empty()) throw ArgumentError("cannot stack an empty batch");
  const std::size_t T = samples.front()->length, C = samples.front()->channels;
  Tensor out({samples.size(), T, C});
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b]->length != T || samples[b]->channels != C)
      throw ShapeError("batch samples must share length and channel count; interpolate first");
    std::copy(samples[b]->values.begin(), samples[b]->values.end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(b * T * C));
  }
  return out;
}

namespace {

Tensor forward_single(const Sample& sample, Model& model, Mode mode, std::uint64_t dropout_seed) {
  const Sample* ptr = &sample;
  Tape tape;
  const auto out = model.forward(tape, stack_samples({&ptr, 1}), mode, dropout_seed);
  const Tensor& lp = tape.value(out.log_probs);
  Shape shape(lp.shape().begin() + 1, lp.shape().end());
  return Tensor(shape, std::vector<double>(lp.data().begin(), lp.data().end()));
}

}  // namespace

Tensor forward_seq2seq(const Sample& sample, Model& model, Mode mode, std::uint64_t dropout_seed) {
  if (model.head() != Head::kSequence) throw ArgumentError("forward_seq2seq needs a sequence-head model");
  return forward_single(sample, model, mode, dropout_seed);
}

Tensor forward_char(const Sample& sample, Model& model, Mode mode, std::uint64_t dropout_seed) {
  if (model.head() != Head::kCharacter) throw ArgumentError("forward_char needs a character-head model");
  return forward_single(sample, model, mode, dropout_seed);
}

}  // namespace imupen::nn
