#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "imupen/dataio.hpp"
#include "imupen/losses.hpp"
#include "imupen/model.hpp"
#include "imupen/optim.hpp"
#include "imupen/preprocess.hpp"
#include "json.hpp"

namespace imupen::nn {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 50;
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t target_len = 800;
  std::size_t beam_width = 0;  // 0 decodes greedily
  bool track_train_metrics = false;
  std::optional<AugmentConfig> augment;
  std::set<AugmentMethod> augment_methods;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// CTC for sequence labels, or one of the character losses.
struct LossSelector {
  std::optional<CharLoss> char_loss;
  LossParams params;
  std::vector<double> class_prior;  // joint optimization only; empty = uniform

  bool is_ctc() const noexcept { return !char_loss.has_value(); }
  Head head() const noexcept { return is_ctc() ? Head::kSequence : Head::kCharacter; }
  std::string name() const { return is_ctc() ? "ctc" : to_string(*char_loss); }
  static LossSelector parse(std::string_view name);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::size_t skipped = 0;  // CTC-infeasible samples left out this epoch
  std::optional<double> val_cer, val_wer, val_crr;
  std::optional<double> train_cer, train_wer, train_crr;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainResult {
  Model model;
  AdamState adam;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const Model&, const AdamState&)>;

/// Mini-batch training with Adam. Every random choice (initialization,
/// batch order, augmentation, dropout) is derived from train_cfg.seed and the
/// epoch, so `resume` with an earlier result continues the same trajectory.
TrainResult train(const Dataset& dataset, const Fold& fold, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const LossSelector& loss, const EpochCallback& on_epoch = {}, const TrainResult* resume = nullptr);

/// Eval-mode predictions for the chosen samples, interpolated to
/// `target_len`: decoded label sequences for a sequence head, single argmax
/// classes for a character head.
std::vector<Sequence> predict(Model& model, std::span<const Sample> samples, std::span<const std::size_t> indices,
                              std::size_t target_len, std::size_t batch_size, std::size_t beam_width = 0);

struct Scores {
  std::optional<double> cer, wer, crr;
};

/// CER and WER (one word per whitespace-separated token of the decoded
/// label) for sequence heads, CRR for character heads.
Scores score(const Model& model, std::span<const Sequence> references, std::span<const Sequence> hypotheses,
             const Alphabet& alphabet);

}  // namespace imupen::nn
