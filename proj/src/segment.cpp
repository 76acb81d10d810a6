#include "imupen/segment.hpp"

#include <algorithm>
#include <cstdint>

#include "imupen/errors.hpp"

namespace imupen {

StrokeConstraintTable::StrokeConstraintTable(std::map<std::string, std::set<int>> allowed)
    : allowed_(std::move(allowed)) {
  for (const auto& [symbol, counts] : allowed_) {
    if (counts.empty()) throw ArgumentError("symbol '" + symbol + "' has no allowed stroke count");
    if (*counts.begin() < 1) throw ArgumentError("stroke counts must be at least 1");
  }
}

const std::set<int>& StrokeConstraintTable::lookup(const std::string& symbol) const {
  auto it = allowed_.find(symbol);
  if (it == allowed_.end()) throw ArgumentError("no stroke constraint for symbol '" + symbol + "'");
  return it->second;
}

StrokeConstraintTable default_constraints() {
  return StrokeConstraintTable({{"0", {1}},
                                {"1", {1}},
                                {"2", {1}},
                                {"3", {1}},
                                {"4", {1, 2}},
                                {"5", {2}},
                                {"6", {1}},
                                {"7", {1, 2}},
                                {"8", {1}},
                                {"9", {1}},
                                {"+", {2}},
                                {"-", {1}},
                                {"·", {1}},
                                {":", {2}},
                                {"=", {2}}});
}

StrokeIntervals detect_strokes(std::span<const double> force, double threshold, std::size_t min_len) {
  if (!(threshold > 0.0)) throw ArgumentError("stroke threshold must be positive");
  if (min_len == 0) throw ArgumentError("minimum stroke length must be positive");
  StrokeIntervals out;
  std::size_t t = 0;
  while (t < force.size()) {
    if (force[t] <= threshold) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < force.size() && force[t] > threshold) ++t;
    if (t - start >= min_len) out.emplace_back(start, t - 1);
  }
  return out;
}

namespace {

void enumerate(std::span<const std::string> symbols, const StrokeConstraintTable& constraints, std::size_t pos,
               int remaining, std::vector<int>& current, std::vector<std::vector<int>>& out, std::size_t limit,
               const std::vector<int>& min_suffix, const std::vector<int>& max_suffix) {
  if (out.size() >= limit) return;
  if (pos == symbols.size()) {
    if (remaining == 0) out.push_back(current);
    return;
  }
  for (int c : constraints.lookup(symbols[pos])) {
    const int rest = remaining - c;
    if (rest < min_suffix[pos + 1] || rest > max_suffix[pos + 1]) continue;
    current.push_back(c);
    enumerate(symbols, constraints, pos + 1, rest, current, out, limit, min_suffix, max_suffix);
    current.pop_back();
  }
}

}  // namespace

std::vector<std::vector<int>> stroke_assignments(std::span<const std::string> symbols,
                                                 const StrokeConstraintTable& constraints, int strokes,
                                                 std::size_t limit) {
  const std::size_t n = symbols.size();
  std::vector<int> min_suffix(n + 1, 0), max_suffix(n + 1, 0);
  for (std::size_t i = n; i-- > 0;) {
    const auto& allowed = constraints.lookup(symbols[i]);
    min_suffix[i] = min_suffix[i + 1] + *allowed.begin();
    max_suffix[i] = max_suffix[i + 1] + *allowed.rbegin();
  }
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  enumerate(symbols, constraints, 0, strokes, current, out, limit, min_suffix, max_suffix);
  return out;
}

SplitResult split_equation(const Sample& sample, const Alphabet& alphabet, const StrokeConstraintTable& constraints,
                           const SegmentOptions& opts) {
  if (sample.label.empty()) throw ArgumentError("cannot split a sample with an empty label");
  if (opts.force_channel >= sample.channels) throw ArgumentError("force channel index outside the sample");
  std::vector<std::string> symbols;
  for (int idx : sample.label) {
    symbols.push_back(alphabet.decode(idx));
    constraints.lookup(symbols.back());
  }
  const std::string label_text = decode_label(sample.label, alphabet);

  SplitResult result;
  result.strokes = detect_strokes(sample.channel_values(opts.force_channel), opts.threshold, opts.min_len);
  const int s = static_cast<int>(result.strokes.size());
  if (s == 0) throw SegmentationError("no strokes detected for label '" + label_text + "'");

  const auto solutions = stroke_assignments(symbols, constraints, s, 2);
  if (solutions.empty())
    throw SegmentationError("no stroke assignment for label '" + label_text + "' with " + std::to_string(s) +
                            " strokes");
  result.assignment = solutions.front();
  result.ambiguous = solutions.size() > 1;

  std::size_t stroke = 0;
  for (std::size_t j = 0; j < symbols.size(); ++j) {
    const auto count = static_cast<std::size_t>(result.assignment[j]);
    const std::size_t begin = result.strokes[stroke].first;
    const std::size_t end = result.strokes[stroke + count - 1].second;
    stroke += count;
    Sample ch;
    ch.length = end - begin + 1;
    ch.channels = sample.channels;
    ch.values.assign(sample.values.begin() + static_cast<std::ptrdiff_t>(begin * sample.channels),
                     sample.values.begin() + static_cast<std::ptrdiff_t>((end + 1) * sample.channels));
    ch.label = {sample.label[j]};
    ch.writer_id = sample.writer_id;
    ch.rate_hz = sample.rate_hz;
    result.characters.push_back(std::move(ch));
  }
  return result;
}

}  // namespace imupen
