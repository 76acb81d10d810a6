#include "imupen/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "imupen/errors.hpp"
#include "imupen/rng.hpp"
#include "imupen/utf8.hpp"

namespace imupen {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_size(std::string_view s, std::size_t& out) {
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Header {
  std::size_t channels = 0;
  double rate_hz = 0.0;
};

Header parse_header(std::string_view line) {
  Header h;
  bool have_channels = false, have_rate = false;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) comma = line.size();
    std::string_view field = trim(line.substr(pos, comma - pos));
    const std::size_t colon = field.find(':');
    if (colon == std::string_view::npos) throw FormatError("malformed header field '" + std::string(field) + "'", 1);
    const std::string_view key = trim(field.substr(0, colon));
    const std::string_view val = field.substr(colon + 1);
    if (key == "channels") {
      if (!parse_size(val, h.channels) || h.channels == 0) throw FormatError("bad channel count", 1);
      have_channels = true;
    } else if (key == "rate_hz") {
      if (!parse_double(val, h.rate_hz) || !(h.rate_hz > 0.0) || !std::isfinite(h.rate_hz))
        throw FormatError("bad sampling rate", 1);
      have_rate = true;
    } else {
      throw FormatError("unknown header key '" + std::string(key) + "'", 1);
    }
    pos = comma + 1;
  }
  if (!have_channels || !have_rate) throw FormatError("header must declare channels and rate_hz", 1);
  return h;
}

struct LabelLine {
  std::string label;
  std::size_t start = 0;
  std::size_t end = 0;
  std::int64_t writer_id = 0;
  std::size_t line_no = 0;
};

std::vector<LabelLine> parse_label_lines(std::string_view labels_text) {
  std::vector<LabelLine> out;
  const auto lines = split_lines(labels_text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const std::size_t line_no = i + 1;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON label line: ") + e.what(), line_no);
    }
    if (!j.is_object() || j.size() != 4 || !j.contains("label") || !j.contains("start") ||
        !j.contains("end") || !j.contains("writer_id"))
      throw FormatError("label line needs exactly label, start, end, writer_id", line_no);
    if (!j["label"].is_string() || !j["start"].is_number_integer() || !j["end"].is_number_integer() ||
        !j["writer_id"].is_number_integer())
      throw FormatError("label line field has the wrong type", line_no);
    LabelLine l;
    l.label = j["label"].get<std::string>();
    const auto start = j["start"].get<std::int64_t>();
    const auto end = j["end"].get<std::int64_t>();
    l.writer_id = j["writer_id"].get<std::int64_t>();
    if (start < 0 || end < 0) throw RangeError("line " + std::to_string(line_no) + ": negative label window");
    if (l.writer_id < 0) throw RangeError("line " + std::to_string(line_no) + ": negative writer_id");
    l.start = static_cast<std::size_t>(start);
    l.end = static_cast<std::size_t>(end);
    l.line_no = line_no;
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace

std::vector<double> Sample::channel_values(std::size_t c) const {
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) out[t] = at(t, c);
  return out;
}

void Sample::set_channel(std::size_t c, std::span<const double> v) {
  for (std::size_t t = 0; t < length; ++t) at(t, c) = v[t];
}

void validate_sample(const Sample& s, std::size_t num_classes) {
  if (s.length == 0 || s.channels == 0) throw ValueError("sample must have at least one row and channel");
  if (s.values.size() != s.length * s.channels) throw ValueError("sample value count does not match its shape");
  if (!(s.rate_hz > 0.0)) throw ValueError("sampling rate must be positive");
  if (s.writer_id < 0) throw ValueError("writer_id must be non-negative");
  if (s.label.empty()) throw ValueError("sample label must be non-empty");
  for (int idx : s.label) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= num_classes)
      throw RangeError("label index " + std::to_string(idx) + " outside alphabet");
  }
  for (double v : s.values) {
    if (!std::isfinite(v)) throw ValueError("sample contains a non-finite value");
  }
  if (s.channels == channel::kCount) {
    for (std::size_t t = 0; t < s.length; ++t) {
      if (s.at(t, channel::kForce) < 0.0) throw ValueError("negative force value at row " + std::to_string(t));
    }
  }
}

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw ArgumentError("alphabet symbols must be non-empty");
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second)
      throw ArgumentError("duplicate alphabet symbol '" + symbols_[i] + "'");
  }
}

int Alphabet::encode(std::string_view symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) throw EncodingError("symbol '" + std::string(symbol) + "' is not in the alphabet");
  return it->second;
}

const std::string& Alphabet::decode(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= symbols_.size())
    throw RangeError("index " + std::to_string(index) + " is not a symbol (blank is " +
                     std::to_string(blank_index()) + ")");
  return symbols_[static_cast<std::size_t>(index)];
}

bool Alphabet::contains(std::string_view symbol) const { return index_.find(symbol) != index_.end(); }

Alphabet equations_alphabet() {
  return Alphabet({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "-", "·", ":", "="});
}

Alphabet build_alphabet(std::span<const std::string> labels) {
  std::set<std::pair<char32_t, std::string>> seen;
  for (const auto& label : labels) {
    for (auto& cp : utf8::split_code_points(label)) {
      const char32_t code = utf8::code_point(cp);
      seen.emplace(code, std::move(cp));
    }
  }
  if (seen.empty()) throw ArgumentError("build_alphabet needs at least one non-empty label");
  std::vector<std::string> symbols;
  symbols.reserve(seen.size());
  for (const auto& [code, s] : seen) symbols.push_back(s);
  return Alphabet(std::move(symbols));
}

Sequence encode_label(std::string_view text, const Alphabet& alphabet) {
  Sequence out;
  for (const auto& cp : utf8::split_code_points(text)) out.push_back(alphabet.encode(cp));
  return out;
}

std::string decode_label(std::span<const int> seq, const Alphabet& alphabet) {
  std::string out;
  for (int idx : seq) out += alphabet.decode(idx);
  return out;
}

std::vector<std::string> read_label_strings(std::string_view labels_text) {
  std::vector<std::string> out;
  for (auto& l : parse_label_lines(labels_text)) out.push_back(std::move(l.label));
  return out;
}

std::vector<Sample> parse_recording(std::string_view raw_text, std::string_view labels_text,
                                    const Alphabet& alphabet) {
  const auto lines = split_lines(raw_text);
  if (lines.empty() || trim(lines[0]).empty()) throw FormatError("missing header", 1);
  const Header header = parse_header(trim(lines[0]));

  std::vector<double> rows;
  std::size_t row_count = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const std::size_t line_no = i + 1;
    std::size_t fields = 0;
    std::size_t pos = 0;
    const std::size_t first_value = rows.size();
    rows.resize(rows.size() + header.channels);
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string_view::npos) comma = line.size();
      const std::string_view field = line.substr(pos, comma - pos);
      double v = 0.0;
      if (fields > header.channels) {
        ++fields;
        pos = comma + 1;
        continue;
      }
      if (!parse_double(field, v)) throw FormatError("unparseable number '" + std::string(trim(field)) + "'", line_no);
      if (!std::isfinite(v)) throw ValueError("line " + std::to_string(line_no) + ": non-finite value");
      if (fields > 0) rows[first_value + fields - 1] = v;
      ++fields;
      pos = comma + 1;
    }
    if (fields != header.channels + 1)
      throw FormatError("expected " + std::to_string(header.channels + 1) + " fields, got " +
                            std::to_string(fields),
                        line_no);
    ++row_count;
  }

  std::vector<Sample> samples;
  for (const auto& l : parse_label_lines(labels_text)) {
    if (l.start > l.end || l.end >= row_count)
      throw RangeError("line " + std::to_string(l.line_no) + ": label window [" + std::to_string(l.start) +
                       ", " + std::to_string(l.end) + "] outside " + std::to_string(row_count) + " rows");
    Sample s;
    s.length = l.end - l.start + 1;
    s.channels = header.channels;
    s.values.assign(rows.begin() + static_cast<std::ptrdiff_t>(l.start * header.channels),
                    rows.begin() + static_cast<std::ptrdiff_t>((l.end + 1) * header.channels));
    s.label = encode_label(l.label, alphabet);
    s.writer_id = l.writer_id;
    s.rate_hz = header.rate_hz;
    validate_sample(s, alphabet.size());
    samples.push_back(std::move(s));
  }
  return samples;
}

Dataset parse_recording(std::string_view raw_text, std::string_view labels_text) {
  const auto labels = read_label_strings(labels_text);
  Dataset ds;
  ds.alphabet = build_alphabet(labels);
  ds.samples = parse_recording(raw_text, labels_text, ds.alphabet);
  return ds;
}

RecordingText write_recording(std::span<const Sample> samples, const Alphabet& alphabet) {
  if (samples.empty()) throw ArgumentError("write_recording needs at least one sample");
  const std::size_t channels = samples.front().channels;
  const double rate = samples.front().rate_hz;
  RecordingText out;
  out.raw = "channels:" + std::to_string(channels) + ",rate_hz:" + format_double(rate) + "\n";
  std::size_t t = 0;
  for (const auto& s : samples) {
    if (s.channels != channels || s.rate_hz != rate)
      throw ArgumentError("all samples of one recording must share channel count and rate");
    const std::size_t start = t;
    for (std::size_t r = 0; r < s.length; ++r, ++t) {
      out.raw += std::to_string(t);
      for (double v : s.row(r)) {
        out.raw += ',';
        out.raw += format_double(v);
      }
      out.raw += '\n';
    }
    nlohmann::json j;
    j["label"] = decode_label(s.label, alphabet);
    j["start"] = start;
    j["end"] = t - 1;
    j["writer_id"] = s.writer_id;
    out.labels += j.dump() + "\n";
  }
  return out;
}

nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["alphabet"] = ds.alphabet.symbols();
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const auto& s : ds.samples) {
    nlohmann::json js;
    js["label"] = decode_label(s.label, ds.alphabet);
    js["writer_id"] = s.writer_id;
    js["rate_hz"] = s.rate_hz;
    js["channels"] = s.channels;
    js["length"] = s.length;
    js["values"] = s.values;
    arr.push_back(std::move(js));
  }
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  try {
    Dataset ds;
    ds.alphabet = Alphabet(j.at("alphabet").get<std::vector<std::string>>());
    for (const auto& js : j.at("samples")) {
      Sample s;
      s.label = encode_label(js.at("label").get<std::string>(), ds.alphabet);
      s.writer_id = js.at("writer_id").get<std::int64_t>();
      s.rate_hz = js.at("rate_hz").get<double>();
      s.channels = js.at("channels").get<std::size_t>();
      s.length = js.at("length").get<std::size_t>();
      s.values = js.at("values").get<std::vector<double>>();
      validate_sample(s, ds.alphabet.size());
      ds.samples.push_back(std::move(s));
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset file: ") + e.what());
  }
}

std::string to_string(SplitMode mode) { return mode == SplitMode::kWriterDependent ? "WD" : "WI"; }

SplitMode parse_split_mode(std::string_view text) {
  if (text == "WD" || text == "wd") return SplitMode::kWriterDependent;
  if (text == "WI" || text == "wi") return SplitMode::kWriterIndependent;
  throw ArgumentError("split mode must be WD or WI, got '" + std::string(text) + "'");
}

FoldPlan make_splits(std::span<const Sample> samples, SplitMode mode, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("fold count must be at least 2");
  const auto folds = static_cast<std::size_t>(k);

  // Writers in order of first appearance, each with its sample indices.
  std::vector<std::int64_t> writers;
  std::map<std::int64_t, std::vector<std::size_t>> by_writer;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = by_writer.try_emplace(samples[i].writer_id);
    if (inserted) writers.push_back(samples[i].writer_id);
    it->second.push_back(i);
  }

  // fold_of[i] = validation fold of sample i, or `folds` if it never validates.
  std::vector<std::size_t> fold_of(samples.size(), folds);
  if (mode == SplitMode::kWriterIndependent) {
    if (writers.size() < folds)
      throw ArgumentError("writer-independent split needs at least " + std::to_string(k) + " writers, got " +
                          std::to_string(writers.size()));
    Rng rng = make_rng(seed, {0x5749});
    std::shuffle(writers.begin(), writers.end(), rng);
    for (std::size_t w = 0; w < writers.size(); ++w) {
      for (std::size_t i : by_writer[writers[w]]) fold_of[i] = w % folds;
    }
  } else {
    // Per writer: shuffle its samples, then deal them to folds starting where
    // the previous writer stopped so small writers do not pile onto fold 0.
    std::size_t offset = 0;
    for (std::int64_t w : writers) {
      auto idx = by_writer[w];
      Rng rng = make_rng(seed, {0x5744, static_cast<std::uint64_t>(w)});
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t r = 0; r < idx.size(); ++r) fold_of[idx[r]] = (offset + r) % folds;
      offset = (offset + idx.size()) % folds;
    }
  }

  FoldPlan plan{mode, k, seed, std::vector<Fold>(folds)};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t f = 0; f < folds; ++f) (fold_of[i] == f ? plan.folds[f].val : plan.folds[f].train).push_back(i);
  }
  return plan;
}

nlohmann::json fold_plan_to_json(const FoldPlan& plan) {
  nlohmann::json j;
  j["mode"] = to_string(plan.mode);
  j["k"] = plan.k;
  j["seed"] = plan.seed;
  auto& folds = j["folds"] = nlohmann::json::array();
  for (const auto& f : plan.folds) folds.push_back({{"train", f.train}, {"val", f.val}});
  return j;
}

FoldPlan fold_plan_from_json(const nlohmann::json& j) {
  try {
    FoldPlan plan;
    plan.mode = parse_split_mode(j.at("mode").get<std::string>());
    plan.k = j.at("k").get<int>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds"))
      plan.folds.push_back({f.at("train").get<std::vector<std::size_t>>(), f.at("val").get<std::vector<std::size_t>>()});
    if (plan.folds.size() != static_cast<std::size_t>(plan.k)) throw FormatError("fold count does not match k");
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed fold plan: ") + e.what());
  }
}

}  // namespace imupen
