#include "imupen/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "imupen/errors.hpp"

namespace imupen {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(std::min(a, b) - mx));
}

std::size_t classes_of(std::span<const double> log_probs, std::size_t frames) {
  if (frames == 0) throw ArgumentError("CTC needs at least one frame");
  if (log_probs.size() % frames != 0 || log_probs.size() / frames < 1)
    throw ShapeError("log-probability matrix is not [frames, classes]");
  return log_probs.size() / frames;
}

std::vector<int> extend_with_blanks(std::span<const int> target, int blank) {
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] < 0 || target[i] >= blank)
      throw ArgumentError("CTC target symbol " + std::to_string(target[i]) + " is the blank or out of range");
    ext[2 * i + 1] = target[i];
  }
  return ext;
}

}  // namespace

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1];
  return n;
}

CtcLattice ctc_lattice(std::span<const double> log_probs, std::size_t frames, std::span<const int> target) {
  const std::size_t classes = classes_of(log_probs, frames);
  const int blank = static_cast<int>(classes) - 1;
  const auto ext = extend_with_blanks(target, blank);
  if (frames < ctc_min_frames(target))
    throw InfeasibleError("target of length " + std::to_string(target.size()) + " needs at least " +
                          std::to_string(ctc_min_frames(target)) + " frames, got " + std::to_string(frames));

  const std::size_t S = ext.size();
  CtcLattice lat;
  lat.frames = frames;
  lat.states = S;
  lat.log_alpha.assign(frames * S, kNegInf);
  lat.log_beta.assign(frames * S, kNegInf);
  const auto lp = [&](std::size_t t, std::size_t s) { return log_probs[t * classes + static_cast<std::size_t>(ext[s])]; };
  // A skip over the blank at s-1 is allowed when s is a label differing from s-2.
  const auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  auto* alpha = lat.log_alpha.data();
  alpha[0] = lp(0, 0);
  if (S > 1) alpha[1] = lp(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    const double* prev = alpha + (t - 1) * S;
    double* cur = alpha + t * S;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (can_skip(s)) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + lp(t, s);
    }
  }

  auto* beta = lat.log_beta.data();
  beta[(frames - 1) * S + S - 1] = 0.0;
  if (S > 1) beta[(frames - 1) * S + S - 2] = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    const double* next = beta + (t + 1) * S;
    double* cur = beta + t * S;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = next[s] + lp(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, next[s + 1] + lp(t + 1, s + 1));
      if (s + 2 < S && can_skip(s + 2)) acc = log_add(acc, next[s + 2] + lp(t + 1, s + 2));
      cur[s] = acc;
    }
  }

  const double* last = alpha + (frames - 1) * S;
  lat.log_likelihood = S > 1 ? log_add(last[S - 1], last[S - 2]) : last[0];
  return lat;
}

LossOutput ctc_loss(std::span<const double> log_probs, std::size_t frames, std::span<const int> target) {
  const std::size_t classes = classes_of(log_probs, frames);
  const auto lat = ctc_lattice(log_probs, frames, target);
  if (!std::isfinite(lat.log_likelihood)) throw ValueError("target has zero probability under the given frames");
  const int blank = static_cast<int>(classes) - 1;
  const auto ext = extend_with_blanks(target, blank);

  LossOutput out{-lat.log_likelihood, std::vector<double>(log_probs.size(), 0.0)};
  std::vector<double> occupancy(classes);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < lat.states; ++s) {
      auto& o = occupancy[static_cast<std::size_t>(ext[s])];
      o = log_add(o, lat.log_alpha[t * lat.states + s] + lat.log_beta[t * lat.states + s]);
    }
    for (std::size_t k = 0; k < classes; ++k) {
      if (occupancy[k] != kNegInf) out.grad_logits[t * classes + k] = -std::exp(occupancy[k] - lat.log_likelihood);
    }
  }
  return out;
}

Sequence greedy_decode(std::span<const double> log_probs, std::size_t frames) {
  const std::size_t classes = classes_of(log_probs, frames);
  const int blank = static_cast<int>(classes) - 1;
  Sequence out;
  int prev = -1;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto row = log_probs.subspan(t * classes, classes);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

Sequence beam_decode(std::span<const double> log_probs, std::size_t frames, std::size_t beam_width) {
  if (beam_width == 0) throw ArgumentError("beam width must be at least 1");
  const std::size_t classes = classes_of(log_probs, frames);
  const int blank = static_cast<int>(classes) - 1;

  struct Score {
    double blank = kNegInf;      // paths ending in blank
    double non_blank = kNegInf;  // paths ending in the prefix's last symbol
    double total() const { return log_add(blank, non_blank); }
  };
  using Beam = std::vector<std::pair<Sequence, Score>>;
  Beam beam{{Sequence{}, Score{0.0, kNegInf}}};

  for (std::size_t t = 0; t < frames; ++t) {
    const auto row = log_probs.subspan(t * classes, classes);
    std::map<Sequence, Score> next;
    for (const auto& [prefix, sc] : beam) {
      const double total = sc.total();
      auto& same = next[prefix];
      same.blank = log_add(same.blank, total + row[static_cast<std::size_t>(blank)]);
      if (!prefix.empty()) {
        same.non_blank = log_add(same.non_blank, sc.non_blank + row[static_cast<std::size_t>(prefix.back())]);
      }
      for (int c = 0; c < blank; ++c) {
        Sequence extended = prefix;
        extended.push_back(c);
        auto& ext = next[extended];
        const double from = !prefix.empty() && prefix.back() == c ? sc.blank : total;
        ext.non_blank = log_add(ext.non_blank, from + row[static_cast<std::size_t>(c)]);
      }
    }
    beam.assign(next.begin(), next.end());
    // Highest probability first; equal scores fall back to the prefix order.
    std::stable_sort(beam.begin(), beam.end(),
                     [](const auto& a, const auto& b) { return a.second.total() > b.second.total(); });
    if (beam.size() > beam_width) beam.resize(beam_width);
  }
  return beam.front().first;
}

}  // namespace imupen
