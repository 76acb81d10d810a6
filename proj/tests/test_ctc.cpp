#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "imupen/ctc.hpp"
#include "imupen/errors.hpp"
#include "imupen/kernels.hpp"
#include "imupen/rng.hpp"

namespace imupen {
namespace {

std::vector<double> random_log_probs(Rng& rng, std::size_t T, std::size_t C) {
  std::normal_distribution<double> n(0.0, 1.5);
  std::vector<double> out;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> row(C);
    for (auto& v : row) v = n(rng);
    const auto lp = log_softmax(row);
    out.insert(out.end(), lp.begin(), lp.end());
  }
  return out;
}

Sequence collapse(const std::vector<int>& path, int blank) {
  Sequence out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

// Probability mass of every collapsed labeling, by enumerating all paths.
std::map<Sequence, double> labeling_mass(const std::vector<double>& lp, std::size_t T, std::size_t C) {
  std::map<Sequence, double> mass;
  std::vector<int> path(T, 0);
  while (true) {
    double logp = 0.0;
    for (std::size_t t = 0; t < T; ++t) logp += lp[t * C + static_cast<std::size_t>(path[t])];
    mass[collapse(path, static_cast<int>(C) - 1)] += std::exp(logp);
    std::size_t i = 0;
    while (i < T && ++path[i] == static_cast<int>(C)) path[i++] = 0;
    if (i == T) break;
  }
  return mass;
}

TEST(Ctc, SingleFrame) {
  const std::vector<double> lp{std::log(0.7), std::log(0.3)};
  EXPECT_NEAR(ctc_loss(lp, 1, Sequence{0}).value, -std::log(0.7), 1e-12);
}

TEST(Ctc, TwoFramesOneSymbol) {
  const double a1 = 0.6, b1 = 0.4, a2 = 0.3, b2 = 0.7;
  const std::vector<double> lp{std::log(a1), std::log(b1), std::log(a2), std::log(b2)};
  EXPECT_NEAR(ctc_loss(lp, 2, Sequence{0}).value, -std::log(a1 * a2 + a1 * b2 + b1 * a2), 1e-12);
}

TEST(Ctc, RepeatNeedsSeparatingBlank) {
  Rng rng = make_rng(5, {});
  const auto lp = random_log_probs(rng, 4, 3);
  const auto mass = labeling_mass(lp, 4, 3);
  EXPECT_NEAR(ctc_loss(lp, 4, Sequence{0, 0}).value, -std::log(mass.at(Sequence{0, 0})), 1e-9);
  EXPECT_EQ(ctc_min_frames(Sequence{0, 0}), 3u);
  EXPECT_THROW(ctc_loss(std::vector<double>(2 * 3, std::log(1.0 / 3)), 2, Sequence{0, 0}), InfeasibleError);
}

TEST(Ctc, BlankInTargetRejected) {
  const std::vector<double> lp(6, std::log(0.5));
  EXPECT_THROW(ctc_loss(lp, 3, Sequence{1}), ArgumentError);
}

TEST(Ctc, MatchesAlignmentEnumeration) {
  for (std::size_t K = 1; K <= 3; ++K) {
    const std::size_t C = K + 1;
    for (std::size_t T = 1; T <= 5; ++T) {
      Rng rng = make_rng(17, {K, T});
      for (int draw = 0; draw < 5; ++draw) {
        const auto lp = random_log_probs(rng, T, C);
        for (const auto& [label, p] : labeling_mass(lp, T, C)) {
          if (label.empty() || label.size() > 3) continue;
          ASSERT_NEAR(ctc_loss(lp, T, label).value, -std::log(p), 1e-9);
        }
      }
    }
  }
}

TEST(Ctc, ForwardBackwardAgreeAtEveryFrame) {
  Rng rng = make_rng(9, {});
  const std::size_t T = 6, C = 4;
  const auto lp = random_log_probs(rng, T, C);
  const Sequence target{0, 2, 2};
  const auto lat = ctc_lattice(lp, T, target);
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0.0;
    for (std::size_t s = 0; s < lat.states; ++s)
      sum += std::exp(lat.log_alpha[t * lat.states + s] + lat.log_beta[t * lat.states + s]);
    EXPECT_NEAR(std::log(sum), lat.log_likelihood, 1e-9);
  }
}

TEST(Ctc, GradientRowsSumToMinusOne) {
  // d(-log P)/d(log p_t(k)) summed over k is -1 for every frame.
  Rng rng = make_rng(2, {});
  const auto lp = random_log_probs(rng, 5, 3);
  const auto out = ctc_loss(lp, 5, Sequence{1, 0});
  for (std::size_t t = 0; t < 5; ++t) {
    const double s = out.grad_logits[t * 3] + out.grad_logits[t * 3 + 1] + out.grad_logits[t * 3 + 2];
    EXPECT_NEAR(s, -1.0, 1e-12);
  }
}

TEST(Ctc, BatchKernelsAgree) {
  Rng rng = make_rng(4, {});
  const std::size_t B = 5, T = 6, C = 4;
  std::vector<double> lp;
  for (std::size_t b = 0; b < B; ++b) {
    const auto part = random_log_probs(rng, T, C);
    lp.insert(lp.end(), part.begin(), part.end());
  }
  const std::vector<Sequence> targets{{0}, {1, 1}, {2, 0, 1}, {0, 0, 0, 0}, {1, 2}};
  const auto par = kernels::parallel::ctc_batch(lp, B, T, C, targets);
  const auto ref = kernels::reference::ctc_batch(lp, B, T, C, targets);
  EXPECT_EQ(par.feasible, ref.feasible);
  EXPECT_FALSE(par.feasible[3]);
  EXPECT_TRUE(std::isnan(par.values[3]));
  for (std::size_t b = 0; b < B; ++b) {
    if (!par.feasible[b]) continue;
    EXPECT_NEAR(par.values[b], ref.values[b], 1e-12);
    EXPECT_NEAR(par.values[b], ctc_loss(std::span(lp).subspan(b * T * C, T * C), T, targets[b]).value, 1e-12);
  }
  for (std::size_t i = 0; i < par.grads.size(); ++i) EXPECT_NEAR(par.grads[i], ref.grads[i], 1e-12);
}

std::vector<double> from_argmax(const std::vector<int>& frames, std::size_t C) {
  std::vector<double> lp;
  for (int f : frames)
    for (std::size_t k = 0; k < C; ++k) lp.push_back(static_cast<int>(k) == f ? std::log(0.9) : std::log(0.1 / (C - 1)));
  return lp;
}

TEST(Decode, GreedyCollapses) {
  // a a - a b with blank = 2
  const auto lp = from_argmax({0, 0, 2, 0, 1}, 3);
  EXPECT_EQ(greedy_decode(lp, 5), (Sequence{0, 0, 1}));
  EXPECT_TRUE(greedy_decode(from_argmax({2, 2, 2}, 3), 3).empty());
  EXPECT_EQ(greedy_decode(from_argmax({0}, 3), 1), Sequence{0});
}

TEST(Decode, BeamOfOneFollowsDominantPath) {
  const auto lp = from_argmax({1, 1, 2, 0, 0, 2}, 3);
  EXPECT_EQ(beam_decode(lp, 6, 1), greedy_decode(lp, 6));
  EXPECT_EQ(beam_decode(lp, 6, 4), (Sequence{1, 0}));
  EXPECT_THROW(beam_decode(lp, 6, 0), ArgumentError);
}

TEST(Decode, WideBeamFindsMostProbableLabeling) {
  for (std::size_t K = 1; K <= 2; ++K) {
    const std::size_t C = K + 1;
    for (std::size_t T = 1; T <= 4; ++T) {
      Rng rng = make_rng(23, {K, T});
      for (int draw = 0; draw < 10; ++draw) {
        const auto lp = random_log_probs(rng, T, C);
        const auto mass = labeling_mass(lp, T, C);
        const auto best = std::max_element(mass.begin(), mass.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        EXPECT_EQ(beam_decode(lp, T, 10000), best->first);
      }
    }
  }
}

}  // namespace
}  // namespace imupen
