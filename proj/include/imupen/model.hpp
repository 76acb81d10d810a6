#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "imupen/autodiff.hpp"
#include "imupen/dataio.hpp"
#include "imupen/layers.hpp"
#include "json.hpp"

namespace imupen::nn {

enum class RecurrentKind { kLstm, kBiLstm };
enum class Head { kSequence, kCharacter };

std::string to_string(RecurrentKind k);
RecurrentKind parse_recurrent_kind(std::string_view s);
std::string to_string(Head h);
Head parse_head(std::string_view s);

struct ModelConfig {
  std::size_t conv_filters = 200;
  std::size_t conv_kernel = 4;
  std::size_t pool_size = 2;
  double dropout_rate = 0.2;
  RecurrentKind recurrent_kind = RecurrentKind::kBiLstm;
  std::size_t lstm_units = 100;
  kernels::Activation lstm_activation = kernels::Activation::kRelu;
  std::size_t bilstm_units = 60;  // per direction
  std::size_t bilstm_layers = 2;
  std::size_t dense_units = 100;  // character head only
  std::size_t num_classes = 15;   // K, excluding the CTC blank
  bool use_batchnorm = true;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Convolution block (conv, max-pool, optional batch norm, dropout), a
/// recurrent stack, and either a per-frame CTC head with K+1 outputs or a
/// character head (temporal mean, dense + ReLU, dense K).
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, Head head, std::size_t input_channels, std::uint64_t seed);

  struct Output {
    Var logits;     // [B, T', K+1] or [B, K]
    Var log_probs;  // log-softmax of logits over the last axis
  };

  /// `batch` is [B, T, input_channels].
  Output forward(Tape& tape, const Tensor& batch, Mode mode, std::uint64_t dropout_seed = 0);

  const ModelConfig& config() const noexcept { return cfg_; }
  Head head() const noexcept { return head_; }
  std::size_t input_channels() const noexcept { return input_channels_; }
  std::size_t output_classes() const noexcept {
    return head_ == Head::kSequence ? cfg_.num_classes + 1 : cfg_.num_classes;
  }
  std::size_t output_frames(std::size_t input_frames) const {
    return (input_frames + cfg_.pool_size - 1) / cfg_.pool_size;
  }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  Parameter& parameter(std::string_view name);
  BatchNormState& batchnorm_state() noexcept { return bn_; }
  const BatchNormState& batchnorm_state() const noexcept { return bn_; }

  void zero_grad();

 private:
  std::size_t add(std::string name, Shape shape);
  Tensor& at(std::size_t i) { return params_[i].tensor; }

  ModelConfig cfg_;
  Head head_ = Head::kSequence;
  std::size_t input_channels_ = 0;
  std::vector<Parameter> params_;
  BatchNormState bn_;

  struct RecurrentParams {
    std::size_t wx, wh, b;
    bool reverse;
  };
  std::size_t conv_w_ = 0, conv_b_ = 0, bn_gamma_ = 0, bn_beta_ = 0;
  std::vector<std::vector<RecurrentParams>> layers_;  // layer -> directions
  std::size_t out_w_ = 0, out_b_ = 0, hidden_w_ = 0, hidden_b_ = 0;
};

/// Stacks samples of one length into a [B, T, C] tensor.
Tensor stack_samples(std::span<const Sample* const> samples);

/// [T', K+1] per-frame log probabilities for one sample.
Tensor forward_seq2seq(const Sample& sample, Model& model, Mode mode, std::uint64_t dropout_seed = 0);

/// [K] class log probabilities for one sample.
Tensor forward_char(const Sample& sample, Model& model, Mode mode, std::uint64_t dropout_seed = 0);

}  // namespace imupen::nn
