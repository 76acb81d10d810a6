#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace imupen {

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_logits;
};

struct LossParams {
  double fl_alpha = 0.75;
  double fl_gamma = 8.0;
  double lsr_beta = 0.1;
  double sbs_beta = 0.95;
  double hbs_beta = 0.8;
  double gce_alpha = 0.95;
  double sce_alpha = 0.5;
  double sce_beta = 0.5;
  double jo_alpha = 1.2;
  double jo_beta = 0.8;
  double log_clamp_eps = 1e-12;
  double rce_log_zero = -4.0;
  // Keeps the 1/K factor of the cross-entropy family. Off gives the
  // conventional scale-free losses.
  bool normalize_by_classes = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const LossParams& p);
void from_json(const nlohmann::json& j, LossParams& p);

/// Numerically stable log-softmax. Throws ValueError on non-finite input.
std::vector<double> log_softmax(std::span<const double> logits);

// Single-sample character losses. `logits` holds K unnormalized scores and
// `target` the true class; the returned gradient is with respect to logits.
LossOutput cce(std::span<const double> logits, int target, const LossParams& p);
LossOutput focal(std::span<const double> logits, int target, const LossParams& p);
LossOutput lsr(std::span<const double> logits, int target, const LossParams& p);
LossOutput boot_soft(std::span<const double> logits, int target, const LossParams& p);
LossOutput boot_hard(std::span<const double> logits, int target, const LossParams& p);
LossOutput gce(std::span<const double> logits, int target, const LossParams& p);
LossOutput sce(std::span<const double> logits, int target, const LossParams& p);

/// Joint-optimization objective over a batch: mean cross entropy plus
/// jo_alpha * KL(prior || mean prediction) plus jo_beta * mean prediction
/// entropy. `logits` is [batch, K]; an empty prior means uniform.
LossOutput joint_opt(std::span<const double> logits, std::size_t batch, std::span<const int> targets,
                     const LossParams& p, std::span<const double> class_prior = {});

enum class CharLoss { kCce, kFocal, kLsr, kBootSoft, kBootHard, kGce, kSce, kJointOpt };

std::string to_string(CharLoss loss);
CharLoss parse_char_loss(std::string_view name);
std::vector<CharLoss> all_char_losses();

/// Batch-mean of a per-sample loss (or the batch objective for kJointOpt).
LossOutput char_loss(CharLoss kind, std::span<const double> logits, std::size_t batch, std::span<const int> targets,
                     const LossParams& p, std::span<const double> class_prior = {});

}  // namespace imupen
