#include "imupen/losses.hpp"

#include <algorithm>
#include <cmath>

#include "imupen/errors.hpp"

namespace imupen {
namespace {

// Softmax probabilities together with clamped log-probabilities. `live[i]`
// is false where the clamp is active, so the log term is locally constant.
struct Prediction {
  std::vector<double> p;
  std::vector<double> logp;
  std::vector<unsigned char> live;
};

Prediction predict(std::span<const double> logits, double eps) {
  Prediction pr;
  pr.logp = log_softmax(logits);
  const double floor = std::log(eps);
  pr.p.resize(logits.size());
  pr.live.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    pr.p[i] = std::exp(pr.logp[i]);
    pr.live[i] = pr.logp[i] > floor;
    if (!pr.live[i]) pr.logp[i] = floor;
  }
  return pr;
}

// With dL/dp_i = dp[i] (explicit dependence on p) and dL/dlogp_i = dlogp[i],
// the logit gradient is c_j - p_j * sum_i c_i where c_i = dp_i p_i + dlogp_i.
void chain_to_logits(const Prediction& pr, std::span<const double> dp, std::span<const double> dlogp,
                     std::span<double> grad) {
  const std::size_t k = pr.p.size();
  std::vector<double> c(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    c[i] = dp[i] * pr.p[i] + (pr.live[i] ? dlogp[i] : 0.0);
    total += c[i];
  }
  for (std::size_t j = 0; j < k; ++j) grad[j] = c[j] - pr.p[j] * total;
}

void check_target(std::span<const double> logits, int target) {
  if (logits.empty()) throw ArgumentError("loss needs at least one class");
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw ArgumentError("target index " + std::to_string(target) + " outside [0, " +
                        std::to_string(logits.size() - 1) + "]");
}

double class_factor(const LossParams& p, std::size_t k) {
  return p.normalize_by_classes ? 1.0 / static_cast<double>(k) : 1.0;
}

struct Terms {
  std::vector<double> dp, dlogp;
  explicit Terms(std::size_t k) : dp(k, 0.0), dlogp(k, 0.0) {}
};

LossOutput finish(const Prediction& pr, double value, const Terms& terms) {
  LossOutput out{value, std::vector<double>(pr.p.size())};
  chain_to_logits(pr, terms.dp, terms.dlogp, out.grad_logits);
  return out;
}

}  // namespace

void LossParams::validate() const {
  if (!(fl_alpha >= 0.0 && fl_alpha <= 1.0)) throw ArgumentError("fl_alpha must lie in [0, 1]");
  if (!(fl_gamma >= 0.0)) throw ArgumentError("fl_gamma must be non-negative");
  if (!(gce_alpha > 0.0 && gce_alpha <= 1.0)) throw ArgumentError("gce_alpha must lie in (0, 1]");
  for (double b : {lsr_beta, sbs_beta, hbs_beta}) {
    if (!(b >= 0.0 && b <= 1.0)) throw ArgumentError("beta parameters must lie in [0, 1]");
  }
  if (!(log_clamp_eps > 0.0)) throw ArgumentError("log_clamp_eps must be positive");
  if (!std::isfinite(rce_log_zero)) throw ArgumentError("rce_log_zero must be finite");
}

void to_json(nlohmann::json& j, const LossParams& p) {
  j = nlohmann::json{{"fl_alpha", p.fl_alpha},         {"fl_gamma", p.fl_gamma},
                     {"lsr_beta", p.lsr_beta},         {"sbs_beta", p.sbs_beta},
                     {"hbs_beta", p.hbs_beta},         {"gce_alpha", p.gce_alpha},
                     {"sce_alpha", p.sce_alpha},       {"sce_beta", p.sce_beta},
                     {"jo_alpha", p.jo_alpha},         {"jo_beta", p.jo_beta},
                     {"log_clamp_eps", p.log_clamp_eps}, {"rce_log_zero", p.rce_log_zero},
                     {"normalize_by_classes", p.normalize_by_classes}};
}

void from_json(const nlohmann::json& j, LossParams& p) {
  const LossParams d;
  p.fl_alpha = j.value("fl_alpha", d.fl_alpha);
  p.fl_gamma = j.value("fl_gamma", d.fl_gamma);
  p.lsr_beta = j.value("lsr_beta", d.lsr_beta);
  p.sbs_beta = j.value("sbs_beta", d.sbs_beta);
  p.hbs_beta = j.value("hbs_beta", d.hbs_beta);
  p.gce_alpha = j.value("gce_alpha", d.gce_alpha);
  p.sce_alpha = j.value("sce_alpha", d.sce_alpha);
  p.sce_beta = j.value("sce_beta", d.sce_beta);
  p.jo_alpha = j.value("jo_alpha", d.jo_alpha);
  p.jo_beta = j.value("jo_beta", d.jo_beta);
  p.log_clamp_eps = j.value("log_clamp_eps", d.log_clamp_eps);
  p.rce_log_zero = j.value("rce_log_zero", d.rce_log_zero);
  p.normalize_by_classes = j.value("normalize_by_classes", d.normalize_by_classes);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) throw ArgumentError("log_softmax of an empty vector");
  double mx = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw ValueError("log_softmax input is not finite");
    mx = std::max(mx, z);
  }
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

LossOutput cce(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  const auto pr = predict(logits, p.log_clamp_eps);
  const double w = class_factor(p, logits.size());
  const auto t = static_cast<std::size_t>(target);
  Terms terms(logits.size());
  terms.dlogp[t] = -w;
  return finish(pr, -w * pr.logp[t], terms);
}

LossOutput focal(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  const auto pr = predict(logits, p.log_clamp_eps);
  const double w = class_factor(p, logits.size()) * p.fl_alpha;
  const auto t = static_cast<std::size_t>(target);
  const double q = 1.0 - pr.p[t];
  const double mod = std::pow(q, p.fl_gamma);
  Terms terms(logits.size());
  terms.dlogp[t] = -w * mod;
  if (p.fl_gamma > 0.0 && q > 0.0) terms.dp[t] = w * p.fl_gamma * std::pow(q, p.fl_gamma - 1.0) * pr.logp[t];
  return finish(pr, -w * mod * pr.logp[t], terms);
}

LossOutput lsr(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  const auto pr = predict(logits, p.log_clamp_eps);
  const double w = class_factor(p, logits.size());
  const auto t = static_cast<std::size_t>(target);
  // -(w) log p_t - (w beta) H(p), H(p) = -sum p log p.
  double plogp = 0.0;
  Terms terms(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    plogp += pr.p[i] * pr.logp[i];
    terms.dp[i] = w * p.lsr_beta * pr.logp[i];
    terms.dlogp[i] = w * p.lsr_beta * pr.p[i];
  }
  terms.dlogp[t] -= w;
  return finish(pr, -w * pr.logp[t] + w * p.lsr_beta * plogp, terms);
}

LossOutput boot_soft(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  const auto pr = predict(logits, p.log_clamp_eps);
  const double w = class_factor(p, logits.size());
  const double beta = p.sbs_beta;
  double value = 0.0;
  Terms terms(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double mix = beta * (static_cast<int>(i) == target ? 1.0 : 0.0) + (1.0 - beta) * pr.p[i];
    value -= w * mix * pr.logp[i];
    terms.dp[i] = -w * (1.0 - beta) * pr.logp[i];
    terms.dlogp[i] = -w * mix;
  }
  return finish(pr, value, terms);
}

LossOutput boot_hard(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  const auto pr = predict(logits, p.log_clamp_eps);
  const double w = class_factor(p, logits.size());
  const double beta = p.hbs_beta;
  const auto map = static_cast<std::size_t>(std::max_element(pr.p.begin(), pr.p.end()) - pr.p.begin());
  double value = 0.0;
  Terms terms(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double mix = beta * (static_cast<int>(i) == target ? 1.0 : 0.0) + (1.0 - beta) * (i == map ? 1.0 : 0.0);
    value -= w * mix * pr.logp[i];
    terms.dlogp[i] = -w * mix;
  }
  return finish(pr, value, terms);
}

LossOutput gce(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  if (!(p.gce_alpha > 0.0 && p.gce_alpha <= 1.0)) throw ArgumentError("gce_alpha must lie in (0, 1]");
  const auto pr = predict(logits, p.log_clamp_eps);
  const auto t = static_cast<std::size_t>(target);
  const double a = p.gce_alpha;
  // p_t^a evaluated through the log keeps small-alpha values accurate.
  const double pa = std::exp(a * std::log(pr.p[t]));
  Terms terms(logits.size());
  if (pr.p[t] > 0.0) terms.dp[t] = -pa / pr.p[t];
  return finish(pr, -std::expm1(a * std::log(pr.p[t])) / a, terms);
}

LossOutput sce(std::span<const double> logits, int target, const LossParams& p) {
  check_target(logits, target);
  const auto pr = predict(logits, p.log_clamp_eps);
  const double w = class_factor(p, logits.size());
  const auto t = static_cast<std::size_t>(target);
  // RCE = -w sum_i p_i log q_i with log q_t = 0 and log q_i = A elsewhere.
  double rce = 0.0;
  Terms terms(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i == t) continue;
    rce -= w * pr.p[i] * p.rce_log_zero;
    terms.dp[i] = -p.sce_beta * w * p.rce_log_zero;
  }
  terms.dlogp[t] = -p.sce_alpha * w;
  return finish(pr, p.sce_alpha * (-w * pr.logp[t]) + p.sce_beta * rce, terms);
}

LossOutput joint_opt(std::span<const double> logits, std::size_t batch, std::span<const int> targets,
                     const LossParams& p, std::span<const double> class_prior) {
  if (batch == 0) throw ArgumentError("joint optimization needs a non-empty batch");
  if (logits.size() % batch != 0) throw ShapeError("logit count is not a multiple of the batch size");
  if (targets.size() != batch) throw ShapeError("one target per batch row required");
  const std::size_t k = logits.size() / batch;
  std::vector<double> prior(class_prior.begin(), class_prior.end());
  if (prior.empty()) prior.assign(k, 1.0 / static_cast<double>(k));
  if (prior.size() != k) throw ShapeError("class prior length must equal the class count");
  double prior_sum = 0.0;
  for (double v : prior) {
    if (v < 0.0) throw ArgumentError("class prior must be non-negative");
    prior_sum += v;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw ArgumentError("class prior must sum to 1");

  const double inv_b = 1.0 / static_cast<double>(batch);
  const double w = class_factor(p, k);
  std::vector<Prediction> preds;
  preds.reserve(batch);
  std::vector<double> mean_p(k, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = logits.subspan(b * k, k);
    check_target(row, targets[b]);
    preds.push_back(predict(row, p.log_clamp_eps));
    for (std::size_t j = 0; j < k; ++j) mean_p[j] += inv_b * preds.back().p[j];
  }

  double ce = 0.0, kl = 0.0, ent = 0.0;
  std::vector<double> dkl_dmean(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (prior[j] == 0.0) continue;
    const bool live = mean_p[j] > p.log_clamp_eps;
    const double log_mean = std::log(live ? mean_p[j] : p.log_clamp_eps);
    kl += prior[j] * (std::log(prior[j]) - log_mean);
    if (live) dkl_dmean[j] = -prior[j] / mean_p[j];
  }

  LossOutput out{0.0, std::vector<double>(logits.size())};
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& pr = preds[b];
    const auto t = static_cast<std::size_t>(targets[b]);
    ce -= inv_b * w * pr.logp[t];
    Terms terms(k);
    for (std::size_t i = 0; i < k; ++i) {
      ent -= inv_b * pr.p[i] * pr.logp[i];
      terms.dp[i] = p.jo_alpha * inv_b * dkl_dmean[i] - p.jo_beta * inv_b * pr.logp[i];
      terms.dlogp[i] = -p.jo_beta * inv_b * pr.p[i];
    }
    terms.dlogp[t] -= inv_b * w;
    chain_to_logits(pr, terms.dp, terms.dlogp, std::span<double>(out.grad_logits).subspan(b * k, k));
  }
  out.value = ce + p.jo_alpha * kl + p.jo_beta * ent;
  return out;
}

std::string to_string(CharLoss loss) {
  switch (loss) {
    case CharLoss::kCce: return "cce";
    case CharLoss::kFocal: return "focal";
    case CharLoss::kLsr: return "lsr";
    case CharLoss::kBootSoft: return "sbs";
    case CharLoss::kBootHard: return "hbs";
    case CharLoss::kGce: return "gce";
    case CharLoss::kSce: return "sce";
    case CharLoss::kJointOpt: return "jo";
  }
  return "?";
}

std::vector<CharLoss> all_char_losses() {
  return {CharLoss::kCce,      CharLoss::kFocal, CharLoss::kLsr, CharLoss::kBootSoft,
          CharLoss::kBootHard, CharLoss::kGce,   CharLoss::kSce, CharLoss::kJointOpt};
}

CharLoss parse_char_loss(std::string_view name) {
  for (CharLoss l : all_char_losses()) {
    if (name == to_string(l)) return l;
  }
  throw ArgumentError("unknown character loss '" + std::string(name) + "'");
}

LossOutput char_loss(CharLoss kind, std::span<const double> logits, std::size_t batch, std::span<const int> targets,
                     const LossParams& p, std::span<const double> class_prior) {
  if (kind == CharLoss::kJointOpt) return joint_opt(logits, batch, targets, p, class_prior);
  if (batch == 0) throw ArgumentError("empty batch");
  if (logits.size() % batch != 0 || targets.size() != batch) throw ShapeError("batch shape mismatch");
  const std::size_t k = logits.size() / batch;
  using Fn = LossOutput (*)(std::span<const double>, int, const LossParams&);
  Fn fn = nullptr;
  switch (kind) {
    case CharLoss::kCce: fn = &cce; break;
    case CharLoss::kFocal: fn = &focal; break;
    case CharLoss::kLsr: fn = &lsr; break;
    case CharLoss::kBootSoft: fn = &boot_soft; break;
    case CharLoss::kBootHard: fn = &boot_hard; break;
    case CharLoss::kGce: fn = &gce; break;
    case CharLoss::kSce: fn = &sce; break;
    case CharLoss::kJointOpt: break;
  }
  const double inv_b = 1.0 / static_cast<double>(batch);
  LossOutput out{0.0, std::vector<double>(logits.size())};
  for (std::size_t b = 0; b < batch; ++b) {
    const auto r = fn(logits.subspan(b * k, k), targets[b], p);
    out.value += inv_b * r.value;
    for (std::size_t j = 0; j < k; ++j) out.grad_logits[b * k + j] = inv_b * r.grad_logits[j];
  }
  return out;
}

}  // namespace imupen
