#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imupen/dataio.hpp"

namespace imupen {

/// Inclusive (start, end) timestep pairs of pen-down intervals, ordered and
/// non-overlapping.
using StrokeIntervals = std::vector<std::pair<std::size_t, std::size_t>>;

class StrokeConstraintTable {
 public:
  StrokeConstraintTable() = default;
  explicit StrokeConstraintTable(std::map<std::string, std::set<int>> allowed);

  /// Throws ArgumentError for symbols without an entry.
  const std::set<int>& lookup(const std::string& symbol) const;
  bool contains(const std::string& symbol) const { return allowed_.count(symbol) != 0; }
  const std::map<std::string, std::set<int>>& entries() const { return allowed_; }

 private:
  std::map<std::string, std::set<int>> allowed_;
};

/// Allowed stroke counts for the 15 equation symbols.
StrokeConstraintTable default_constraints();

struct SegmentOptions {
  double threshold = 0.02;  // newtons
  std::size_t min_len = 3;  // timesteps
  std::size_t force_channel = channel::kForce;
};

/// Maximal runs with force > threshold, dropping runs shorter than min_len.
StrokeIntervals detect_strokes(std::span<const double> force, double threshold, std::size_t min_len);

struct SplitResult {
  std::vector<Sample> characters;
  std::vector<int> assignment;  // strokes per character
  bool ambiguous = false;
  StrokeIntervals strokes;
};

/// Every way of giving each label symbol an allowed stroke count so that
/// the counts sum to `strokes`, in lexicographic order. Stops after `limit`
/// solutions.
std::vector<std::vector<int>> stroke_assignments(std::span<const std::string> symbols,
                                                 const StrokeConstraintTable& constraints, int strokes,
                                                 std::size_t limit = SIZE_MAX);

/// Splits an equation sample into single-character samples. Each character
/// spans from the start of its first stroke to the end of its last; pen-up
/// gaps between characters belong to neither.
SplitResult split_equation(const Sample& sample, const Alphabet& alphabet, const StrokeConstraintTable& constraints,
                           const SegmentOptions& opts = {});

}  // namespace imupen
