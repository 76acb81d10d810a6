// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "imupen/cli.hpp"
#include "imupen/ctc.hpp"
#include "imupen/dataio.hpp"
#include "imupen/errors.hpp"
#include "imupen/gradcheck.hpp"
#include "imupen/losses.hpp"
#include "imupen/metrics.hpp"
#include "imupen/preprocess.hpp"
#include "imupen/segment.hpp"
#include "imupen/train.hpp"
#include "support/synthetic.hpp"

namespace imupen {
namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1. edit distance ----

std::vector<Sequence> all_strings(int symbols, std::size_t max_len) {
  std::vector<Sequence> out{{}};
  for (std::size_t begin = 0, len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i)
      for (int s = 0; s < symbols; ++s) {
        Sequence next = out[i];
        next.push_back(s);
        out.push_back(next);
      }
    begin = end;
  }
  return out;
}

// The textbook recursion D(i, j) = min(D(i-1, j) + 1, D(i, j-1) + 1,
// D(i-1, j-1) + [a_i != b_j]), memoized per pair.
int recursive_distance(const Sequence& a, const Sequence& b) {
  int memo[8][8];
  for (auto& row : memo) std::fill(std::begin(row), std::end(row), -1);
  std::function<int(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> int {
    if (i == 0) return static_cast<int>(j);
    if (j == 0) return static_cast<int>(i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    return m = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1] ? 1 : 0)});
  };
  return d(a.size(), b.size());
}

Verdict edit_distance_oracle() {
  const auto t0 = Clock::now();
  const auto strings = all_strings(3, 6);
  std::size_t pairs = 0, bad = 0;
  for (const auto& a : strings)
    for (const auto& b : strings) {
      const auto s = edit_distance(a, b);
      const bool ok = s.distance == recursive_distance(a, b) &&
                      s.distance == s.substitutions + s.insertions + s.deletions && replay(s, b) == a;
      bad += ok ? 0 : 1;
      ++pairs;
    }
  const Sequence kitten{'k', 'i', 't', 't', 'e', 'n'}, sitting{'s', 'i', 't', 't', 'i', 'n', 'g'};
  const int k = edit_distance(kitten, sitting).distance;
  const double secs = seconds_since(t0);
  return {bad == 0 && k == 3 && secs < 30.0,
          fmt("%zu pairs, %zu mismatches, kitten/sitting = %d, %.1f s (limit 30 s)", pairs, bad, k, secs)};
}

// ---- 2. CTC ----

Sequence collapse(const std::vector<int>& path, int blank) {
  Sequence out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

Verdict ctc_oracle() {
  const auto t0 = Clock::now();
  std::size_t losses = 0, decodes = 0, bad_loss = 0, bad_decode = 0;
  double worst = 0.0;
  for (std::size_t K = 1; K <= 3; ++K) {
    const std::size_t C = K + 1;
    const int blank = static_cast<int>(K);
    for (std::size_t T = 1; T <= 6; ++T) {
      Rng rng = make_rng(2024, {K, T});
      std::normal_distribution<double> n(0.0, 1.5);
      for (int draw = 0; draw < 20; ++draw) {
        std::vector<double> lp;
        for (std::size_t t = 0; t < T; ++t) {
          std::vector<double> row(C);
          for (auto& v : row) v = n(rng);
          const auto r = log_softmax(row);
          lp.insert(lp.end(), r.begin(), r.end());
        }
        // Sum every path into its collapsed labeling.
        std::map<Sequence, double> mass;
        std::vector<int> path(T, 0);
        while (true) {
          double logp = 0.0;
          for (std::size_t t = 0; t < T; ++t) logp += lp[t * C + static_cast<std::size_t>(path[t])];
          mass[collapse(path, blank)] += std::exp(logp);
          std::size_t i = 0;
          while (i < T && ++path[i] == static_cast<int>(C)) path[i++] = 0;
          if (i == T) break;
        }
        for (const auto& label : all_strings(static_cast<int>(K), 3)) {
          const auto it = mass.find(label);
          if (it == mass.end()) {
            // Infeasible labelings must be rejected, not scored.
            bool threw = false;
            try {
              ctc_loss(lp, T, label);
            } catch (const InfeasibleError&) {
              threw = true;
            }
            bad_loss += threw ? 0 : 1;
            continue;
          }
          const double err = std::abs(ctc_loss(lp, T, label).value + std::log(it->second));
          worst = std::max(worst, err);
          bad_loss += err <= 1e-9 ? 0 : 1;
          ++losses;
        }
        const auto best = std::max_element(mass.begin(), mass.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        bad_decode += beam_decode(lp, T, 100000) == best->first ? 0 : 1;
        ++decodes;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad_loss == 0 && bad_decode == 0 && secs < 60.0,
          fmt("%zu feasible losses (max |err| %.2e, tol 1e-9), %zu loss failures; %zu beam decodes, %zu differ "
              "from exact argmax; %.1f s (limit 60 s)",
              losses, worst, bad_loss, decodes, bad_decode, secs)};
}

// ---- 3. gradients ----

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  GradCheckOptions opts;
  opts.draws = 100;
  opts.seed = 3;
  const auto results = gradcheck_all(opts);
  double worst = 0.0;
  std::string worst_name;
  bool ok = true;
  std::size_t redraws = 0;
  for (const auto& r : results) {
    redraws += r.redraws;
    ok = ok && r.draws >= 100 && r.max_rel_error < 1e-4;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 300.0, fmt("%zu checks x 100 draws, worst %s %.2e (tol 1e-4), h = %.0e, %zu draws replaced for lying "
                                  "within %.0e of a relu/max-pool kink, %.1f s (limit 300 s)",
                                  results.size(), worst_name.c_str(), worst, opts.step, redraws, opts.kink_margin, secs)};
}

// ---- 4. loss reductions ----

Verdict loss_reductions() {
  Rng rng = make_rng(44, {});
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 14);
  double worst = 0.0;
  std::size_t gce_draws = 0, gce_in_regime = 0, gce_regime_fail = 0, gce_bound_fail = 0;
  double gce_worst_in_regime = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> logits(15);
    for (auto& v : logits) v = (trial % 2 ? 3.0 : 1.0) * n(rng);
    const int t = cls(rng);
    const double base = cce(logits, t, {}).value;
    LossParams p;
    p.fl_gamma = 0.0;
    p.fl_alpha = 1.0;
    p.lsr_beta = 0.0;
    p.sbs_beta = 1.0;
    p.hbs_beta = 1.0;
    p.sce_beta = 0.0;
    worst = std::max({worst, std::abs(focal(logits, t, p).value - base), std::abs(lsr(logits, t, p).value - base),
                      std::abs(boot_soft(logits, t, p).value - base), std::abs(boot_hard(logits, t, p).value - base),
                      std::abs(sce(logits, t, p).value - p.sce_alpha * base)});

    LossParams g;
    g.gce_alpha = 1e-4;
    const double nll = -log_softmax(logits)[static_cast<std::size_t>(t)];
    const double gap = std::abs(gce(logits, t, g).value - nll);
    ++gce_draws;
    // Exact gap is a l^2/2 + O(a^2 l^3), so 1e-3 is reachable only for l <= ~4.47.
    if (gap > 1e-4 * nll * nll / 2 * 1.01 + 1e-12) ++gce_bound_fail;
    if (nll <= 4.4) {
      ++gce_in_regime;
      gce_worst_in_regime = std::max(gce_worst_in_regime, gap);
      if (gap >= 1e-3) ++gce_regime_fail;
    }
  }
  return {worst <= 1e-12 && gce_regime_fail == 0 && gce_bound_fail == 0,
          fmt("FL/LSR/SBS/HBS/SCE reductions max |diff| %.1e (tol 1e-12); GCE(1e-4) vs -log p_t: worst %.2e on "
              "%zu/%zu draws with -log p_t <= 4.4 (tol 1e-3), %zu draws beyond that limit all within the "
              "second-order gap bound",
              worst, gce_worst_in_regime, gce_in_regime, gce_draws, gce_draws - gce_in_regime)};
}

// ---- 5. overfit ----

Verdict overfit() {
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = Clock::now();
  auto ds = synth::sequence_dataset(20, 4, 3, 5, channel::kCount, 10, 7);
  for (auto& s : ds.samples)
    for (std::size_t t = 0; t < s.length; ++t) s.at(t, channel::kForce) = std::abs(s.at(t, channel::kForce));
  Fold fold;
  for (std::size_t i = 0; i < 20; ++i) fold.train.push_back(i);
  nn::ModelConfig mc;
  mc.conv_filters = 8;
  mc.recurrent_kind = nn::RecurrentKind::kBiLstm;
  mc.bilstm_units = 8;
  mc.bilstm_layers = 2;
  nn::TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.batch_size = 4;
  tc.epochs = 300;
  tc.seed = 1;
  tc.target_len = 50;
  auto r = nn::train(ds, fold, mc, tc, nn::LossSelector{});
  const auto hyps = nn::predict(r.model, ds.samples, fold.train, tc.target_len, tc.batch_size);
  std::vector<Sequence> refs;
  for (const auto& s : ds.samples) refs.push_back(s.label);
  const double train_cer = cer(refs, hyps);
  const double first = r.history.front().train_loss, last = r.history.back().train_loss;
  const double secs = seconds_since(t0);
  omp_set_num_threads(threads);
  return {train_cer == 0.0 && last < 0.1 * first && secs < 300.0,
          fmt("training CER %.4f after %zu epochs, loss %.4f -> %.4f (%.2f%% of epoch 1), %.1f s on 1 thread "
              "(limit 300 s)",
              train_cer, r.history.size(), first, last, 100.0 * last / first, secs)};
}

// ---- 6. segmentation ----

Verdict segmentation() {
  const auto alphabet = equations_alphabet();
  const auto table = default_constraints();
  Rng rng = make_rng(66, {});
  std::uniform_int_distribution<int> sym(0, 14);
  std::uniform_int_distribution<std::size_t> len(1, 9);
  std::size_t built = 0, correct = 0, rejected = 0;
  while (built < 200) {
    Sequence label(len(rng));
    for (auto& c : label) c = sym(rng);
    std::vector<int> counts;
    std::vector<std::vector<int>> options;
    for (int c : label) {
      const auto& allowed = table.lookup(alphabet.decode(c));
      options.emplace_back(allowed.begin(), allowed.end());
      std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
      counts.push_back(options.back()[pick(rng)]);
    }
    int S = 0;
    for (int c : counts) S += c;
    // Count compositions by brute force over the cartesian product.
    std::size_t solutions = 0;
    std::vector<std::size_t> idx(label.size(), 0);
    while (true) {
      int sum = 0;
      for (std::size_t j = 0; j < idx.size(); ++j) sum += options[j][idx[j]];
      solutions += sum == S ? 1 : 0;
      std::size_t j = 0;
      while (j < idx.size() && ++idx[j] == options[j].size()) idx[j++] = 0;
      if (j == idx.size()) break;
    }
    if (solutions != 1) {
      ++rejected;
      continue;
    }
    ++built;
    const auto eq = synth::equation(label, counts, rng);
    const auto r = split_equation(eq.sample, alphabet, table);
    bool ok = !r.ambiguous && r.assignment == counts && r.characters.size() == label.size();
    for (std::size_t j = 0; ok && j < label.size(); ++j) {
      const auto& ch = r.characters[j];
      const auto [b, e] = eq.boundaries[j];
      ok = ch.length == e - b + 1 && ch.label == Sequence{label[j]} &&
           std::equal(ch.values.begin(), ch.values.end(), eq.sample.values.begin() + static_cast<std::ptrdiff_t>(b * ch.channels));
    }
    correct += ok ? 1 : 0;
  }
  Sample s47 = synth::equation(encode_label("47", alphabet), {2, 1}, rng).sample;
  const auto r47 = split_equation(s47, alphabet, table);
  const bool amb = r47.ambiguous && r47.assignment == std::vector<int>{1, 2};
  return {correct == 200 && amb, fmt("%zu/200 unique-assignment equations split exactly (%zu ambiguous draws "
                                     "skipped); \"47\" with 3 strokes ambiguous=%s, chose (%d,%d)",
                                     correct, rejected, r47.ambiguous ? "true" : "false", r47.assignment[0],
                                     r47.assignment[1])};
}

// ---- 7. splits ----

Verdict splits() {
  const auto samples = synth::writer_samples(50, 20, 77);
  bool ok = true;
  std::size_t folds_checked = 0;
  for (auto mode : {SplitMode::kWriterIndependent, SplitMode::kWriterDependent}) {
    const auto plan = make_splits(samples, mode, 5, 123);
    ok = ok && plan == make_splits(samples, mode, 5, 123);
    std::vector<int> val_count(samples.size(), 0);
    for (const auto& f : plan.folds) {
      ++folds_checked;
      std::vector<int> seen(samples.size(), 0);
      for (auto i : f.train) ++seen[i];
      for (auto i : f.val) {
        ++seen[i];
        ++val_count[i];
      }
      ok = ok && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
      if (mode == SplitMode::kWriterIndependent) {
        std::set<std::int64_t> train_writers;
        for (auto i : f.train) train_writers.insert(samples[i].writer_id);
        for (auto i : f.val) ok = ok && !train_writers.count(samples[i].writer_id);
      } else {
        std::map<std::int64_t, std::size_t> per;
        for (auto i : f.val) ++per[samples[i].writer_id];
        for (std::int64_t w = 1000; w < 1050; ++w) ok = ok && per[w] >= 4 && per[w] <= 4;  // 20 / 5 exactly
      }
    }
    ok = ok && std::all_of(val_count.begin(), val_count.end(), [](int c) { return c == 1; });
  }
  // Uneven per-writer counts exercise the +-1 balance.
  const auto uneven = synth::writer_samples(50, 23, 78);
  const auto plan = make_splits(uneven, SplitMode::kWriterDependent, 5, 9);
  for (const auto& f : plan.folds) {
    std::map<std::int64_t, std::size_t> per;
    for (auto i : f.val) ++per[uneven[i].writer_id];
    for (std::int64_t w = 1000; w < 1050; ++w) ok = ok && per[w] >= 4 && per[w] <= 5;
  }
  return {ok, fmt("50 writers x 20 samples, %zu folds: WI writer-disjoint, WD per-writer balance, partition and "
                  "seed reproducibility %s; 23-sample writers balanced within +-1",
                  folds_checked, ok ? "hold" : "violated")};
}

// ---- 8. augmentation ----

Verdict augmentation() {
  Dataset ds = synth::sequence_dataset(10, 3, 2, 4, channel::kCount, 12, 5);
  for (auto& s : ds.samples)
    for (std::size_t t = 0; t < s.length; ++t) s.at(t, channel::kForce) = std::abs(s.at(t, channel::kForce)) + 50.0;
  const std::set<AugmentMethod> all{AugmentMethod::kScale, AugmentMethod::kShift, AugmentMethod::kJitter,
                                    AugmentMethod::kMagWarp, AugmentMethod::kTimeWarp};
  auto augmented = [&](const AugmentConfig& cfg, const std::set<AugmentMethod>& methods, std::uint64_t seed) {
    Dataset out = ds;
    for (std::size_t i = 0; i < out.samples.size(); ++i)
      out.samples[i] = augment(out.samples[i], cfg, methods, derive_seed(seed, {i}));
    return out;
  };
  AugmentConfig always;
  always.p_apply = 1.0;
  const bool deterministic = cli::dataset_hash(augmented(always, all, 8)) == cli::dataset_hash(augmented(always, all, 8)) &&
                             cli::dataset_hash(augmented(always, all, 8)) != cli::dataset_hash(augmented(always, all, 9));
  AugmentConfig never;
  never.p_apply = 0.0;
  const bool identity = cli::dataset_hash(augmented(never, all, 8)) == cli::dataset_hash(ds);

  bool scale_ok = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto& s = ds.samples[seed % ds.samples.size()];
    const auto a = augment(s, always, {AugmentMethod::kScale}, seed);
    for (std::size_t c = 0; c < s.channels; ++c) {
      const double r0 = a.at(0, c) / s.at(0, c);
      scale_ok = scale_ok && r0 >= 0.9 && r0 <= 1.1;
      for (std::size_t t = 1; t < s.length; ++t)
        if (std::abs(s.at(t, c)) > 1e-9) scale_ok = scale_ok && std::abs(a.at(t, c) / s.at(t, c) - r0) < 1e-9;
    }
  }

  // Noise statistics on one channel over 10,000 seeds.
  const auto& s = ds.samples[0];
  const std::size_t c = 3;
  double m = 0.0, v = 0.0;
  for (std::size_t t = 0; t < s.length; ++t) m += s.at(t, c);
  m /= static_cast<double>(s.length);
  for (std::size_t t = 0; t < s.length; ++t) v += (s.at(t, c) - m) * (s.at(t, c) - m);
  const double channel_std = std::sqrt(v / static_cast<double>(s.length));
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto a = augment(s, always, {AugmentMethod::kJitter}, seed);
    for (std::size_t t = 0; t < s.length; ++t) {
      const double d = a.at(t, c) - s.at(t, c);
      sum += d;
      sum2 += d * d;
      ++count;
    }
  }
  const double mean_d = sum / static_cast<double>(count);
  const double sd = std::sqrt(sum2 / static_cast<double>(count) - mean_d * mean_d);
  const double expected = always.jitter_sigma * channel_std;
  const double jitter_rel = std::abs(sd - expected) / expected;

  double endpoint = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto& x = ds.samples[seed % ds.samples.size()];
    const auto a = augment(x, always, {AugmentMethod::kTimeWarp}, seed);
    for (std::size_t ch = 0; ch < x.channels; ++ch)
      endpoint = std::max({endpoint, std::abs(a.at(0, ch) - x.at(0, ch)),
                           std::abs(a.at(x.length - 1, ch) - x.at(x.length - 1, ch))});
  }
  return {deterministic && identity && scale_ok && jitter_rel <= 0.1 && endpoint <= 1e-9,
          fmt("hash determinism %s, p_apply=0 identity %s, scale ratios constant in [0.9,1.1] %s, jitter std "
              "off by %.2f%% (tol 10%%), time-warp endpoint drift %.1e (tol 1e-9)",
              deterministic ? "ok" : "FAIL", identity ? "ok" : "FAIL", scale_ok ? "ok" : "FAIL", 100.0 * jitter_rel,
              endpoint)};
}

// ---- 9. spot values ----

Verdict spot_checks() {
  const double uniform = cce(std::vector<double>(15, 0.0), 0, {}).value;
  const double l = lsr(std::vector<double>{0.0, 0.0}, 0, {}).value;
  const double s = sce(std::vector<double>{0.0, 0.0}, 0, {}).value;
  const double e1 = std::abs(uniform - std::log(15.0) / 15.0), e2 = std::abs(l - 0.311916),
               e3 = std::abs(s - 0.673287);
  return {e1 <= 1e-12 && e2 <= 1e-6 && e3 <= 1e-6,
          fmt("CCE(K=15 uniform) = %.15f (|err| %.1e, tol 1e-12), LSR = %.6f (|err| %.1e), SCE = %.6f (|err| %.1e)",
              uniform, e1, l, e2, s, e3)};
}

}  // namespace
}  // namespace imupen

int main() {
  using namespace imupen;
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
      {"1 edit-distance oracle", edit_distance_oracle}, {"2 CTC oracle", ctc_oracle},
      {"3 gradient suite", gradient_suite},             {"4 loss reductions", loss_reductions},
      {"5 overfit end-to-end", overfit},                {"6 segmentation round-trip", segmentation},
      {"7 split invariants", splits},                   {"8 augmentation properties", augmentation},
      {"9 numeric spot checks", spot_checks}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v{false, ""};
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.detail = std::string("threw: ") + e.what();
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s criterion %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
