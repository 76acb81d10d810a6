#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "imupen/errors.hpp"
#include "imupen/gradcheck.hpp"
#include "imupen/losses.hpp"
#include "imupen/rng.hpp"

namespace imupen {
namespace {

std::vector<double> softmax(std::span<const double> logits) {
  auto lp = log_softmax(logits);
  for (auto& v : lp) v = std::exp(v);
  return lp;
}

std::vector<double> random_logits(Rng& rng, std::size_t n, double sigma = 2.0) {
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

TEST(LogSoftmax, Examples) {
  const auto a = log_softmax(std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(a[0], -std::log(2.0), 1e-15);
  EXPECT_NEAR(a[1], -std::log(2.0), 1e-15);
  for (double c : {-50.0, 0.0, 3.0, 700.0}) {
    const auto b = log_softmax(std::vector<double>(4, c));
    for (double v : b) EXPECT_NEAR(v, -std::log(4.0), 1e-12);
  }
  const auto big = log_softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_NEAR(big[0], 0.0, 1e-12);
  EXPECT_NEAR(big[1], -1000.0, 1e-9);
  EXPECT_THROW(log_softmax(std::vector<double>{0.0, NAN}), ValueError);
}

TEST(CharLosses, UniformCceMatchesClosedForm) {
  const std::vector<double> logits(15, 0.3);
  EXPECT_NEAR(cce(logits, 4, {}).value, std::log(15.0) / 15.0, 1e-12);
}

TEST(CharLosses, PerfectPredictionCostsNothing) {
  const std::vector<double> logits{60.0, 0.0, 0.0};
  const LossParams p;
  EXPECT_NEAR(cce(logits, 0, p).value, 0.0, 1e-12);
  EXPECT_NEAR(focal(logits, 0, p).value, 0.0, 1e-12);
  EXPECT_NEAR(gce(logits, 0, p).value, 0.0, 1e-12);
  EXPECT_NEAR(sce(logits, 0, p).value, 0.0, 1e-12);
}

TEST(CharLosses, HandComputedExamples) {
  const std::vector<double> logits{0.0, 0.0};
  const double ln2 = std::log(2.0);
  EXPECT_NEAR(lsr(logits, 0, {}).value, ln2 / 2 - 0.1 * ln2 / 2, 1e-12);
  EXPECT_NEAR(lsr(logits, 0, {}).value, 0.311916, 1e-6);
  EXPECT_NEAR(sce(logits, 0, {}).value, 0.5 * ln2 / 2 + 0.5 * (-(0.5) * (0.5 * 0 + 0.5 * -4.0)), 1e-12);
  EXPECT_NEAR(sce(logits, 0, {}).value, 0.673287, 1e-6);
}

TEST(CharLosses, Reductions) {
  Rng rng = make_rng(31, {});
  std::uniform_int_distribution<int> cls(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto logits = random_logits(rng, 6);
    const int t = cls(rng);
    const double base = cce(logits, t, {}).value;

    LossParams p;
    p.fl_gamma = 0.0;
    p.fl_alpha = 1.0;
    EXPECT_NEAR(focal(logits, t, p).value, base, 1e-12);
    p.lsr_beta = 0.0;
    EXPECT_NEAR(lsr(logits, t, p).value, base, 1e-12);
    p.sbs_beta = 1.0;
    p.hbs_beta = 1.0;
    EXPECT_NEAR(boot_soft(logits, t, p).value, base, 1e-12);
    EXPECT_NEAR(boot_hard(logits, t, p).value, base, 1e-12);
    p.sce_beta = 0.0;
    EXPECT_NEAR(sce(logits, t, p).value, p.sce_alpha * base, 1e-12);

    p.gce_alpha = 1.0;
    EXPECT_NEAR(gce(logits, t, p).value, 1.0 - softmax(logits)[static_cast<std::size_t>(t)], 1e-12);
  }
}

TEST(CharLosses, GceApproachesLogLossAsAlphaVanishes) {
  // (1 - p^a)/a = -log p - a (log p)^2 / 2 + O(a^2): at a = 1e-4 the gap to
  // -log p stays below 1e-3 while -log p <= 4.4, and obeys the quadratic
  // bound everywhere.
  Rng rng = make_rng(32, {});
  std::uniform_int_distribution<int> cls(0, 5);
  LossParams p;
  p.gce_alpha = 1e-4;
  for (int trial = 0; trial < 400; ++trial) {
    const int t = cls(rng);
    const auto logits = random_logits(rng, 6, trial % 2 ? 1.0 : 4.0);
    const double l = std::log(softmax(logits)[static_cast<std::size_t>(t)]);
    const double gap = -l - gce(logits, t, p).value;
    EXPECT_GE(gap, 0.0);
    EXPECT_LE(gap, 1e-4 * l * l / 2 * 1.01 + 1e-12);
    if (-l <= 4.4) EXPECT_LT(gap, 1e-3);
  }
}

TEST(CharLosses, BootstrappingAtBetaZero) {
  Rng rng = make_rng(8, {});
  const auto logits = random_logits(rng, 4);
  const auto prob = softmax(logits);
  LossParams p;
  p.sbs_beta = 0.0;
  p.hbs_beta = 0.0;
  double entropy = 0.0;
  for (double q : prob) entropy -= q * std::log(q);
  EXPECT_NEAR(boot_soft(logits, 1, p).value, entropy / 4.0, 1e-12);
  const auto j = static_cast<std::size_t>(std::max_element(prob.begin(), prob.end()) - prob.begin());
  EXPECT_NEAR(boot_hard(logits, 1, p).value, -std::log(prob[j]) / 4.0, 1e-12);
}

TEST(CharLosses, NonNegativeAndLsrBounded) {
  Rng rng = make_rng(12, {});
  std::uniform_int_distribution<int> cls(0, 4);
  const LossParams p;
  for (int trial = 0; trial < 200; ++trial) {
    const auto logits = random_logits(rng, 5, 4.0);
    const int t = cls(rng);
    for (auto kind : all_char_losses()) {
      if (kind == CharLoss::kLsr || kind == CharLoss::kJointOpt) continue;
      const std::vector<int> targets{t};
      EXPECT_GE(char_loss(kind, logits, 1, targets, p).value, 0.0) << to_string(kind);
    }
    // CCE >= 0 and entropy <= log K bound the confidence penalty.
    EXPECT_GE(lsr(logits, t, p).value, -p.lsr_beta * std::log(5.0) / 5.0);
  }
}

TEST(CharLosses, TargetOutOfRangeRejected) {
  const std::vector<double> logits{0.0, 1.0};
  EXPECT_THROW(cce(logits, 2, {}), ArgumentError);
  EXPECT_THROW(focal(logits, -1, {}), ArgumentError);
  LossParams bad;
  bad.gce_alpha = 0.0;
  EXPECT_THROW(gce(logits, 0, bad), ArgumentError);
}

TEST(JointOpt, VanishesForConfidentCorrectBalancedBatch) {
  const std::vector<double> logits{80.0, 0.0, 0.0, 80.0};
  const std::vector<int> targets{0, 1};
  EXPECT_NEAR(joint_opt(logits, 2, targets, {}).value, 0.0, 1e-12);
}

TEST(JointOpt, PriorTermVanishesWhenMeanMatchesPrior) {
  const std::vector<double> logits{1.0, 0.0, 0.0, 1.0};
  const std::vector<int> targets{0, 1};
  LossParams p;
  p.jo_alpha = 0.0;
  const double without = joint_opt(logits, 2, targets, p).value;
  p.jo_alpha = 5.0;
  EXPECT_NEAR(joint_opt(logits, 2, targets, p).value, without, 1e-12);
  EXPECT_GE(joint_opt(logits, 2, targets, LossParams{}).value, 0.0);
  EXPECT_THROW(joint_opt({}, 0, {}, p), ArgumentError);
}

TEST(CharLosses, GradientsMatchFiniteDifferences) {
  GradCheckOptions opts;
  opts.draws = 100;
  for (auto kind : all_char_losses()) {
    const auto r = gradcheck(to_string(kind), opts);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.name;
    EXPECT_EQ(r.draws, 100u);
  }
  const auto c = gradcheck("cce", opts);
  EXPECT_LT(c.max_rel_error, 1e-6);
}

TEST(CharLosses, ParamsJsonRoundTrip) {
  LossParams p;
  p.fl_gamma = 2.0;
  p.normalize_by_classes = false;
  const auto back = nlohmann::json(p).get<LossParams>();
  EXPECT_EQ(back.fl_gamma, 2.0);
  EXPECT_FALSE(back.normalize_by_classes);
  EXPECT_EQ(parse_char_loss(to_string(CharLoss::kBootHard)), CharLoss::kBootHard);
  EXPECT_THROW(parse_char_loss("nope"), ArgumentError);
}

}  // namespace
}  // namespace imupen
