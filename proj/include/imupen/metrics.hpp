#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "imupen/dataio.hpp"

namespace imupen {

enum class EditKind { kMatch, kSubstitute, kInsert, kDelete };

/// One aligned step. `ref_pos`/`hyp_pos` index the consumed symbol; for an
/// insertion `ref_pos` is the reference position the extra hypothesis symbol
/// sits before, and for a deletion `hyp_pos` is the matching hypothesis
/// insertion point. Symbols are -1 on the side that is not consumed.
struct EditStep {
  EditKind kind;
  int ref_pos;
  int hyp_pos;
  int ref_symbol;
  int hyp_symbol;
  friend bool operator==(const EditStep&, const EditStep&) = default;
};

struct EditScript {
  int distance = 0;
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  std::vector<EditStep> ops;
};

/// Unit-cost Levenshtein alignment. Insertions are hypothesis symbols absent
/// from the reference, deletions are reference symbols missing from the
/// hypothesis. Traceback prefers match, then substitute, delete, insert.
EditScript edit_distance(std::span<const int> reference, std::span<const int> hypothesis);

/// Scripts for many pairs, computed in parallel.
std::vector<EditScript> edit_distances(std::span<const Sequence> references, std::span<const Sequence> hypotheses);

/// Applies `script` to `hypothesis`, reproducing the reference. Throws
/// ArgumentError if the script does not consume the hypothesis in order.
Sequence replay(const EditScript& script, std::span<const int> hypothesis);

double cer(std::span<const Sequence> references, std::span<const Sequence> hypotheses);

using WordSequence = std::vector<std::string>;
double wer(std::span<const WordSequence> references, std::span<const WordSequence> hypotheses);

double crr(std::span<const Sequence> references, std::span<const Sequence> hypotheses);

struct ErrorHistograms {
  std::vector<std::size_t> mismatch;
  std::vector<std::size_t> insert;
  std::vector<std::size_t> del;
};

/// Non-match operations binned by normalized reference position.
ErrorHistograms error_positions(std::span<const EditScript> scripts, std::span<const std::size_t> ref_lengths,
                                std::size_t bins);

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

/// Rows are reference symbols, columns hypothesis symbols; matches land on
/// the diagonal, substitutions off it.
ConfusionMatrix confusion_matrix(std::span<const EditScript> scripts, const Alphabet& alphabet);

}  // namespace imupen
