#include "imupen/metrics.hpp"

#include <algorithm>
#include <map>

#include "imupen/errors.hpp"
#include "imupen/kernels.hpp"

namespace imupen {

EditScript edit_distance(std::span<const int> reference, std::span<const int> hypothesis) {
  const std::size_t r = reference.size();
  const std::size_t n = hypothesis.size();
  const std::size_t w = n + 1;
  std::vector<int> ed((r + 1) * w);
  for (std::size_t i = 0; i <= r; ++i) ed[i * w] = static_cast<int>(i);
  for (std::size_t j = 0; j <= n; ++j) ed[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= r; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (reference[i - 1] == hypothesis[j - 1]) {
        ed[i * w + j] = ed[(i - 1) * w + j - 1];
      } else {
        ed[i * w + j] = 1 + std::min({ed[(i - 1) * w + j], ed[i * w + j - 1], ed[(i - 1) * w + j - 1]});
      }
    }
  }

  EditScript script;
  script.distance = ed[r * w + n];
  std::size_t i = r, j = n;
  while (i > 0 || j > 0) {
    const int here = ed[i * w + j];
    const int ri = static_cast<int>(i) - 1;
    const int hj = static_cast<int>(j) - 1;
    if (i > 0 && j > 0 && reference[i - 1] == hypothesis[j - 1] && here == ed[(i - 1) * w + j - 1]) {
      script.ops.push_back({EditKind::kMatch, ri, hj, reference[i - 1], hypothesis[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && here == ed[(i - 1) * w + j - 1] + 1) {
      script.ops.push_back({EditKind::kSubstitute, ri, hj, reference[i - 1], hypothesis[j - 1]});
      ++script.substitutions;
      --i, --j;
    } else if (i > 0 && here == ed[(i - 1) * w + j] + 1) {
      script.ops.push_back({EditKind::kDelete, ri, static_cast<int>(j), reference[i - 1], -1});
      ++script.deletions;
      --i;
    } else {
      script.ops.push_back({EditKind::kInsert, static_cast<int>(i), hj, -1, hypothesis[j - 1]});
      ++script.insertions;
      --j;
    }
  }
  std::reverse(script.ops.begin(), script.ops.end());
  return script;
}

std::vector<EditScript> edit_distances(std::span<const Sequence> references, std::span<const Sequence> hypotheses) {
  return kernels::parallel::edit_scripts(references, hypotheses);
}

Sequence replay(const EditScript& script, std::span<const int> hypothesis) {
  Sequence out;
  std::size_t next_hyp = 0;
  const auto consume = [&](const EditStep& op) {
    if (op.hyp_pos != static_cast<int>(next_hyp) || next_hyp >= hypothesis.size() ||
        hypothesis[next_hyp] != op.hyp_symbol)
      throw ArgumentError("edit script does not consume the hypothesis in order");
    ++next_hyp;
  };
  for (const auto& op : script.ops) {
    switch (op.kind) {
      case EditKind::kMatch:
        consume(op);
        out.push_back(op.hyp_symbol);
        break;
      case EditKind::kSubstitute:
        consume(op);
        out.push_back(op.ref_symbol);
        break;
      case EditKind::kInsert:
        consume(op);
        break;
      case EditKind::kDelete:
        out.push_back(op.ref_symbol);
        break;
    }
  }
  if (next_hyp != hypothesis.size()) throw ArgumentError("edit script leaves hypothesis symbols unconsumed");
  return out;
}

namespace {

void check_pairs(std::size_t refs, std::size_t hyps) {
  if (refs != hyps) throw ArgumentError("reference and hypothesis counts differ");
}

double error_rate(std::span<const Sequence> references, std::span<const Sequence> hypotheses) {
  check_pairs(references.size(), hypotheses.size());
  std::size_t total = 0;
  for (const auto& r : references) total += r.size();
  if (total == 0) throw ArgumentError("references contain no symbols");
  long errors = 0;
  for (const auto& s : edit_distances(references, hypotheses)) errors += s.distance;
  return static_cast<double>(errors) / static_cast<double>(total);
}

}  // namespace

double cer(std::span<const Sequence> references, std::span<const Sequence> hypotheses) {
  return error_rate(references, hypotheses);
}

double wer(std::span<const WordSequence> references, std::span<const WordSequence> hypotheses) {
  check_pairs(references.size(), hypotheses.size());
  std::map<std::string, int> vocab;
  const auto intern = [&](std::span<const WordSequence> lists) {
    std::vector<Sequence> out;
    for (const auto& words : lists) {
      Sequence seq;
      for (const auto& word : words) seq.push_back(vocab.try_emplace(word, static_cast<int>(vocab.size())).first->second);
      out.push_back(std::move(seq));
    }
    return out;
  };
  const auto refs = intern(references);
  const auto hyps = intern(hypotheses);
  return error_rate(refs, hyps);
}

double crr(std::span<const Sequence> references, std::span<const Sequence> hypotheses) {
  check_pairs(references.size(), hypotheses.size());
  if (references.empty()) throw ArgumentError("CRR needs at least one reference");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (references[i].size() != 1 || hypotheses[i].size() != 1)
      throw ArgumentError("CRR entries must be single symbols (entry " + std::to_string(i) + ")");
    correct += references[i][0] == hypotheses[i][0];
  }
  return static_cast<double>(correct) / static_cast<double>(references.size());
}

ErrorHistograms error_positions(std::span<const EditScript> scripts, std::span<const std::size_t> ref_lengths,
                                std::size_t bins) {
  if (bins == 0) throw ArgumentError("histogram needs at least one bin");
  if (scripts.size() != ref_lengths.size()) throw ArgumentError("one reference length per script required");
  ErrorHistograms h{std::vector<std::size_t>(bins), std::vector<std::size_t>(bins), std::vector<std::size_t>(bins)};
  for (std::size_t k = 0; k < scripts.size(); ++k) {
    const std::size_t len = ref_lengths[k];
    if (len == 0) throw ArgumentError("reference lengths must be positive");
    for (const auto& op : scripts[k].ops) {
      if (op.kind == EditKind::kMatch) continue;
      const std::size_t bin = std::min(bins - 1, bins * static_cast<std::size_t>(op.ref_pos) / len);
      switch (op.kind) {
        case EditKind::kSubstitute: ++h.mismatch[bin]; break;
        case EditKind::kInsert: ++h.insert[bin]; break;
        case EditKind::kDelete: ++h.del[bin]; break;
        case EditKind::kMatch: break;
      }
    }
  }
  return h;
}

ConfusionMatrix confusion_matrix(std::span<const EditScript> scripts, const Alphabet& alphabet) {
  const std::size_t k = alphabet.size();
  ConfusionMatrix m(k, std::vector<std::size_t>(k, 0));
  for (const auto& s : scripts) {
    for (const auto& op : s.ops) {
      if (op.kind != EditKind::kMatch && op.kind != EditKind::kSubstitute) continue;
      if (op.ref_symbol < 0 || op.hyp_symbol < 0 || static_cast<std::size_t>(op.ref_symbol) >= k ||
          static_cast<std::size_t>(op.hyp_symbol) >= k)
        throw RangeError("edit script symbol outside the alphabet");
      ++m[static_cast<std::size_t>(op.ref_symbol)][static_cast<std::size_t>(op.hyp_symbol)];
    }
  }
  return m;
}

}  // namespace imupen
