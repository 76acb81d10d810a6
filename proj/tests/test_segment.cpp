#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <string>

#include "imupen/errors.hpp"
#include "imupen/segment.hpp"
#include "support/synthetic.hpp"

namespace imupen {
namespace {

// Stroke counts per symbol, typed in from the handwriting reference table.
const std::map<std::string, std::set<int>>& reference_table() {
  static const std::map<std::string, std::set<int>> table{
      {"0", {1}}, {"1", {1}}, {"2", {1}}, {"3", {1}}, {"4", {1, 2}}, {"5", {2}}, {"6", {1}},  {"7", {1, 2}},
      {"8", {1}}, {"9", {1}}, {"+", {2}}, {"-", {1}}, {"\xC2\xB7", {1}}, {":", {2}}, {"=", {2}}};
  return table;
}

// Every vector in {1,2}^L that the table allows and that sums to S, in
// lexicographic order.
std::vector<std::vector<int>> brute_assignments(const std::vector<std::string>& symbols, int S) {
  std::vector<std::vector<int>> out;
  const std::size_t L = symbols.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << L); ++mask) {
    std::vector<int> v(L);
    int sum = 0;
    bool ok = true;
    for (std::size_t j = 0; j < L; ++j) {
      v[j] = (mask >> (L - 1 - j)) & 1 ? 2 : 1;
      sum += v[j];
      ok = ok && reference_table().at(symbols[j]).count(v[j]);
    }
    if (ok && sum == S) out.push_back(v);
  }
  return out;
}

std::vector<std::string> symbols_of(const Sequence& label, const Alphabet& a) {
  std::vector<std::string> out;
  for (int i : label) out.push_back(a.decode(i));
  return out;
}

TEST(Constraints, MatchesReferenceTable) {
  const auto t = default_constraints();
  EXPECT_EQ(t.entries(), reference_table());
  EXPECT_EQ(t.lookup("4"), (std::set<int>{1, 2}));
  EXPECT_EQ(t.lookup("="), std::set<int>{2});
  EXPECT_THROW(t.lookup("a"), ArgumentError);
  const auto eq = equations_alphabet();
  for (const auto& s : eq.symbols()) EXPECT_TRUE(t.contains(s)) << s;
}

TEST(DetectStrokes, Examples) {
  EXPECT_TRUE(detect_strokes(std::vector<double>(9, 0.0), 0.5, 1).empty());
  EXPECT_EQ(detect_strokes(std::vector<double>{0, 1, 1, 0, 1, 0}, 0.5, 1), (StrokeIntervals{{1, 2}, {4, 4}}));
  EXPECT_EQ(detect_strokes(std::vector<double>{0, 1, 0, 1, 1, 0}, 0.5, 2), (StrokeIntervals{{3, 4}}));
  EXPECT_EQ(detect_strokes(std::vector<double>{1, 1}, 0.5, 1), (StrokeIntervals{{0, 1}}));
  // Equal to the threshold is pen-up.
  EXPECT_TRUE(detect_strokes(std::vector<double>{0.5, 0.5}, 0.5, 1).empty());
  EXPECT_THROW(detect_strokes(std::vector<double>{1.0}, 0.0, 1), ArgumentError);
}

Sample with_force(const std::vector<double>& force, const std::string& label) {
  Sample s;
  s.channels = channel::kCount;
  s.length = force.size();
  s.values.assign(s.length * s.channels, 0.25);
  for (std::size_t t = 0; t < s.length; ++t) s.at(t, channel::kForce) = force[t];
  s.label = encode_label(label, equations_alphabet());
  s.writer_id = 11;
  return s;
}

// n strokes of three frames each, one pen-up frame around each.
std::vector<double> strokes(int n) {
  std::vector<double> f{0.0};
  for (int i = 0; i < n; ++i) f.insert(f.end(), {1.0, 1.0, 1.0, 0.0});
  return f;
}

TEST(SplitEquation, OnePlusTwo) {
  const auto r = split_equation(with_force(strokes(4), "1+2"), equations_alphabet(), default_constraints());
  EXPECT_EQ(r.assignment, (std::vector<int>{1, 2, 1}));
  EXPECT_FALSE(r.ambiguous);
  ASSERT_EQ(r.characters.size(), 3u);
  EXPECT_EQ(r.characters[0].length, 3u);
  EXPECT_EQ(r.characters[1].length, 7u);  // two strokes and the gap between them
  EXPECT_EQ(r.characters[1].label, Sequence{10});
  EXPECT_EQ(r.characters[2].writer_id, 11);
}

TEST(SplitEquation, DoubleZero) {
  const auto r = split_equation(with_force(strokes(2), "00"), equations_alphabet(), default_constraints());
  EXPECT_EQ(r.assignment, (std::vector<int>{1, 1}));
  EXPECT_FALSE(r.ambiguous);
}

TEST(SplitEquation, FourSevenIsAmbiguous) {
  const auto r = split_equation(with_force(strokes(3), "47"), equations_alphabet(), default_constraints());
  EXPECT_EQ(r.assignment, (std::vector<int>{1, 2}));
  EXPECT_TRUE(r.ambiguous);
  EXPECT_EQ(brute_assignments({"4", "7"}, 3), (std::vector<std::vector<int>>{{1, 2}, {2, 1}}));
}

TEST(SplitEquation, Errors) {
  const auto a = equations_alphabet();
  const auto t = default_constraints();
  EXPECT_THROW(split_equation(with_force(std::vector<double>(10, 0.0), "1"), a, t), SegmentationError);
  try {
    split_equation(with_force(strokes(3), "1"), a, t);
    FAIL();
  } catch (const SegmentationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('3'), std::string::npos);
    EXPECT_NE(msg.find("'1'"), std::string::npos);
  }
  Sample empty = with_force(strokes(1), "1");
  empty.label.clear();
  EXPECT_THROW(split_equation(empty, a, t), ArgumentError);
}

TEST(StrokeAssignments, MatchBruteForce) {
  const auto a = equations_alphabet();
  const auto t = default_constraints();
  Rng rng = make_rng(41, {});
  std::uniform_int_distribution<int> sym(0, 14);
  std::uniform_int_distribution<std::size_t> len(1, 7);
  for (int trial = 0; trial < 300; ++trial) {
    Sequence label(len(rng));
    for (auto& c : label) c = sym(rng);
    const auto symbols = symbols_of(label, a);
    for (int S = 1; S <= 15; ++S) ASSERT_EQ(stroke_assignments(symbols, t, S), brute_assignments(symbols, S));
  }
}

TEST(SplitEquation, RecoversSyntheticBoundaries) {
  const auto a = equations_alphabet();
  const auto t = default_constraints();
  Rng rng = make_rng(77, {});
  std::uniform_int_distribution<int> sym(0, 14);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  int checked = 0;
  while (checked < 100) {
    Sequence label(len(rng));
    for (auto& c : label) c = sym(rng);
    std::vector<int> counts;
    for (int c : label) {
      const auto& allowed = reference_table().at(a.decode(c));
      std::uniform_int_distribution<std::size_t> pick(0, allowed.size() - 1);
      counts.push_back(*std::next(allowed.begin(), static_cast<std::ptrdiff_t>(pick(rng))));
    }
    int S = 0;
    for (int c : counts) S += c;
    if (brute_assignments(symbols_of(label, a), S).size() != 1) continue;
    const auto eq = synth::equation(label, counts, rng);
    const auto r = split_equation(eq.sample, a, t, SegmentOptions{0.02, 3});
    ASSERT_FALSE(r.ambiguous);
    ASSERT_EQ(r.assignment, counts);
    ASSERT_EQ(r.characters.size(), label.size());
    std::size_t prev_end = 0;
    for (std::size_t j = 0; j < label.size(); ++j) {
      const auto [b, e] = eq.boundaries[j];
      const auto& ch = r.characters[j];
      ASSERT_EQ(ch.length, e - b + 1);
      ASSERT_EQ(ch.label, Sequence{label[j]});
      ASSERT_EQ(ch.at(0, 0), eq.sample.at(b, 0));
      ASSERT_EQ(ch.at(ch.length - 1, channel::kForce), eq.sample.at(e, channel::kForce));
      if (j > 0) ASSERT_GT(b, prev_end);
      prev_end = e;
    }
    int sum = 0;
    for (int c : r.assignment) sum += c;
    ASSERT_EQ(sum, static_cast<int>(r.strokes.size()));
    ++checked;
  }
}

}  // namespace
}  // namespace imupen
