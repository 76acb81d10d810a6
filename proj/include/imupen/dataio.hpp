#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace imupen {

using Sequence = std::vector<int>;

/// Channel layout of a full recording: front accelerometer (x,y,z), rear
/// accelerometer (x,y,z), gyroscope (x,y,z), magnetometer (x,y,z), force.
namespace channel {
inline constexpr std::size_t kFrontAccX = 0;
inline constexpr std::size_t kRearAccX = 3;
inline constexpr std::size_t kGyroX = 6;
inline constexpr std::size_t kMagX = 9;
inline constexpr std::size_t kForce = 12;
inline constexpr std::size_t kCount = 13;
}  // namespace channel

/// One multivariate time-series: `length` timesteps by `channels` values,
/// stored row-major, plus its label sequence and writer.
struct Sample {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<double> values;
  Sequence label;
  std::int64_t writer_id = 0;
  double rate_hz = 100.0;

  double at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }
  double& at(std::size_t t, std::size_t c) { return values[t * channels + c]; }
  std::span<const double> row(std::size_t t) const {
    return {values.data() + t * channels, channels};
  }
  std::vector<double> channel_values(std::size_t c) const;
  void set_channel(std::size_t c, std::span<const double> v);

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Throws ValueError/RangeError if `s` breaks the Sample invariants for an
/// alphabet with `num_classes` symbols. The force channel is only checked on
/// full 13-channel samples.
void validate_sample(const Sample& s, std::size_t num_classes);

/// Ordered, duplicate-free symbol set. The CTC blank sits one past the last
/// symbol and is never a symbol itself.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> symbols);

  std::size_t size() const noexcept { return symbols_.size(); }
  int blank_index() const noexcept { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  int encode(std::string_view symbol) const;
  const std::string& decode(int index) const;
  bool contains(std::string_view symbol) const;

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int, std::less<>> index_;
};

/// 0-9 followed by the operators + - · : = (15 symbols, blank = 15).
Alphabet equations_alphabet();

/// Distinct code points across `labels`, sorted by code point.
Alphabet build_alphabet(std::span<const std::string> labels);

Sequence encode_label(std::string_view text, const Alphabet& alphabet);
std::string decode_label(std::span<const int> seq, const Alphabet& alphabet);

struct Dataset {
  Alphabet alphabet;
  std::vector<Sample> samples;
};

/// Parses the line-oriented recording format: a data file with a
/// `channels:<l>,rate_hz:<r>` header followed by `t,c1,...,cl` rows, and a
/// labels file of JSON lines `{"label","start","end","writer_id"}`. One
/// Sample per label line, sliced to [start, end] inclusive.
std::vector<Sample> parse_recording(std::string_view raw_text, std::string_view labels_text,
                                    const Alphabet& alphabet);

/// Same as above, with the alphabet built from the label strings.
Dataset parse_recording(std::string_view raw_text, std::string_view labels_text);

/// Label strings of a labels file, in file order.
std::vector<std::string> read_label_strings(std::string_view labels_text);

struct RecordingText {
  std::string raw;
  std::string labels;
};

/// Inverse of parse_recording: samples are laid out back to back. Values are
/// written with round-trip precision.
RecordingText write_recording(std::span<const Sample> samples, const Alphabet& alphabet);

nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

enum class SplitMode { kWriterDependent, kWriterIndependent };

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  friend bool operator==(const Fold&, const Fold&) = default;
};

struct FoldPlan {
  SplitMode mode = SplitMode::kWriterDependent;
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

FoldPlan make_splits(std::span<const Sample> samples, SplitMode mode, int k, std::uint64_t seed);

nlohmann::json fold_plan_to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const nlohmann::json& j);

}  // namespace imupen
