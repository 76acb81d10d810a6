#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imupen/dataio.hpp"
#include "imupen/losses.hpp"

namespace imupen {

// All CTC routines take a [frames, classes] matrix of per-frame log
// probabilities whose last column is the blank.

/// Minimum number of frames needed to emit `target`: its length plus one
/// separating blank per adjacent repeat.
std::size_t ctc_min_frames(std::span<const int> target);

/// Forward and backward variables over the blank-extended target of length
/// S = 2L + 1, in log space. `log_alpha[t*S+s]` includes frame t's emission;
/// `log_beta[t*S+s]` covers frames t+1.. only, so for every t
/// logsumexp_s(log_alpha + log_beta) = log_likelihood.
struct CtcLattice {
  std::size_t frames = 0;
  std::size_t states = 0;
  std::vector<double> log_alpha;
  std::vector<double> log_beta;
  double log_likelihood = 0.0;
};

CtcLattice ctc_lattice(std::span<const double> log_probs, std::size_t frames, std::span<const int> target);

/// Negative log-likelihood of `target` and its gradient with respect to
/// `log_probs`. Throws InfeasibleError when the target cannot fit in the
/// frames and ArgumentError when it contains the blank.
LossOutput ctc_loss(std::span<const double> log_probs, std::size_t frames, std::span<const int> target);

/// Best path: per-frame argmax, collapse repeats, drop blanks.
Sequence greedy_decode(std::span<const double> log_probs, std::size_t frames);

/// Prefix beam search over collapsed labelings.
Sequence beam_decode(std::span<const double> log_probs, std::size_t frames, std::size_t beam_width);

}  // namespace imupen
