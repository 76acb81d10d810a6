#include "imupen/cli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "imupen/checkpoint.hpp"
#include "imupen/errors.hpp"
#include "imupen/gradcheck.hpp"
#include "imupen/metrics.hpp"
#include "imupen/preprocess.hpp"
#include "imupen/rng.hpp"
#include "imupen/segment.hpp"
#include "imupen/train.hpp"
#include "json.hpp"

namespace imupen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradTolerance = 1e-4;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const fs::path& path) {
  try {
    return dataset_from_json(read_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Options shared by all commands, plus the parsed JSON config.
struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir;
  json config = json::object();

  std::uint64_t require_seed() const {
    if (seed) return *seed;
    if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
    throw ArgumentError("--seed is required for this command");
  }
  fs::path require_out() const {
    if (out_dir.empty()) throw ArgumentError("--out is required for this command");
    return out_dir;
  }
  json section(const char* key) const { return config.contains(key) ? config[key] : json::object(); }
};

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json dataset_summary(const Dataset& ds) {
  std::map<int, std::size_t> per_class;
  std::map<std::size_t, std::vector<double>> lengths;
  std::set<std::int64_t> writers;
  for (const auto& s : ds.samples) {
    for (int c : s.label) ++per_class[c];
    lengths[s.label.size()].push_back(static_cast<double>(s.length));
    writers.insert(s.writer_id);
  }
  json classes = json::object();
  for (std::size_t c = 0; c < ds.alphabet.size(); ++c) {
    const auto it = per_class.find(static_cast<int>(c));
    classes[ds.alphabet.symbols()[c]] = it == per_class.end() ? 0 : it->second;
  }
  json stats = json::array();
  for (const auto& [len, v] : lengths)
    stats.push_back({{"label_length", len}, {"count", v.size()}, {"mean_timesteps", mean(v)}, {"std_timesteps", stddev(v)}});
  return {{"samples", ds.samples.size()},
          {"writers", writers.size()},
          {"num_classes", ds.alphabet.size()},
          {"class_histogram", classes},
          {"length_stats", stats}};
}

std::set<AugmentMethod> parse_methods(const std::vector<std::string>& names) {
  std::set<AugmentMethod> out;
  for (const auto& n : names) {
    std::stringstream ss(n);
    for (std::string part; std::getline(ss, part, ',');)
      if (!part.empty()) out.insert(parse_augment_method(part));
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

json report(std::span<const Sequence> refs, std::span<const Sequence> hyps, const Alphabet& alphabet,
            const std::vector<WordSequence>& ref_words, const std::vector<WordSequence>& hyp_words, std::size_t bins) {
  const auto scripts = edit_distances(refs, hyps);
  // Positions are relative to the reference, so empty references have none.
  std::vector<EditScript> positioned;
  std::vector<std::size_t> ref_lengths;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].empty()) continue;
    positioned.push_back(scripts[i]);
    ref_lengths.push_back(refs[i].size());
  }
  const auto hist = error_positions(positioned, ref_lengths, bins);
  const auto cm = confusion_matrix(scripts, alphabet);

  std::size_t chars = 0, words = 0;
  for (const auto& r : refs) chars += r.size();
  for (const auto& r : ref_words) words += r.size();
  json j;
  j["cer"] = chars ? json(cer(refs, hyps)) : json(nullptr);
  j["wer"] = words ? json(wer(ref_words, hyp_words)) : json(nullptr);
  const bool single = std::all_of(refs.begin(), refs.end(), [](const Sequence& s) { return s.size() == 1; }) &&
                      std::all_of(hyps.begin(), hyps.end(), [](const Sequence& s) { return s.size() == 1; });
  if (single && !refs.empty()) j["crr"] = crr(refs, hyps);
  j["pairs"] = refs.size();
  j["histograms"] = {{"bins", bins}, {"mismatch", hist.mismatch}, {"insert", hist.insert}, {"delete", hist.del}};
  j["confusion"] = {{"symbols", alphabet.symbols()}, {"matrix", cm}};
  return j;
}

WordSequence words_of(const std::string& text, bool split) {
  if (!split) return {text};
  WordSequence w;
  std::istringstream in(text);
  for (std::string t; in >> t;) w.push_back(t);
  return w;
}

std::vector<std::size_t> selected_indices(const Dataset& ds, const std::string& folds_path, int fold) {
  std::vector<std::size_t> idx;
  if (folds_path.empty()) {
    for (std::size_t i = 0; i < ds.samples.size(); ++i) idx.push_back(i);
    return idx;
  }
  const auto plan = fold_plan_from_json(read_json(folds_path));
  if (fold < 0 || static_cast<std::size_t>(fold) >= plan.folds.size())
    throw ArgumentError("--fold must lie in [0, " + std::to_string(plan.folds.size()) + ")");
  return plan.folds[static_cast<std::size_t>(fold)].val;
}

// ---- commands ----

int cmd_ingest(const Globals& g, const std::string& raw_path, const std::string& labels_path,
               const std::string& alphabet_kind, std::ostream& out) {
  const fs::path out_dir = g.require_out();
  const std::string raw = read_file(raw_path), labels = read_file(labels_path);
  Dataset ds;
  try {
    read_label_strings(labels);
  } catch (const FormatError& e) {
    throw FormatError(labels_path + ": " + e.what());
  }
  try {
    if (alphabet_kind == "equations") {
      ds.alphabet = equations_alphabet();
      ds.samples = parse_recording(raw, labels, ds.alphabet);
    } else if (alphabet_kind == "auto") {
      ds = parse_recording(raw, labels);
    } else {
      throw ArgumentError("--alphabet must be auto or equations");
    }
  } catch (const FormatError& e) {
    throw FormatError(raw_path + ": " + e.what());
  }
  write_file(out_dir / "dataset.json", dataset_to_json(ds).dump());
  out << dataset_summary(ds).dump(2) << "\n";
  return 0;
}

int cmd_split(const Globals& g, const std::string& dataset_path, std::string mode, std::optional<int> k,
              std::ostream& out) {
  const fs::path out_dir = g.require_out();
  const json cfg = g.section("split");
  if (mode.empty()) mode = cfg.value("mode", std::string("WD"));
  const int folds = k ? *k : cfg.value("k", 5);
  const auto ds = load_dataset(dataset_path);
  const auto plan = make_splits(ds.samples, parse_split_mode(mode), folds, g.require_seed());
  write_file(out_dir / "folds.json", fold_plan_to_json(plan).dump());
  json summary{{"mode", to_string(plan.mode)}, {"k", plan.k}, {"seed", plan.seed}, {"folds", json::array()}};
  for (const auto& f : plan.folds) summary["folds"].push_back({{"train", f.train.size()}, {"val", f.val.size()}});
  out << summary.dump(2) << "\n";
  return 0;
}

int cmd_augment(const Globals& g, const std::string& dataset_path, const std::vector<std::string>& method_names,
                std::ostream& out) {
  const fs::path out_dir = g.require_out();
  AugmentConfig cfg = g.config.contains("augment") ? g.config["augment"].get<AugmentConfig>() : AugmentConfig{};
  cfg.validate();
  auto methods = parse_methods(method_names);
  if (method_names.empty() && g.config.contains("augment_methods"))
    methods = parse_methods(g.config["augment_methods"].get<std::vector<std::string>>());
  const std::uint64_t seed = g.require_seed();
  auto ds = load_dataset(dataset_path);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    ds.samples[i] = augment(ds.samples[i], cfg, methods, derive_seed(seed, {i}));
  write_file(out_dir / "augmented.json", dataset_to_json(ds).dump());
  out << json{{"samples", ds.samples.size()}, {"hash", hex64(dataset_hash(ds))}}.dump() << "\n";
  return 0;
}

int cmd_segment(const Globals& g, const std::string& dataset_path, std::optional<double> threshold,
                std::optional<std::size_t> min_len, std::ostream& out, std::ostream& err) {
  const fs::path out_dir = g.require_out();
  const json cfg = g.section("segment");
  SegmentOptions opts;
  opts.threshold = threshold ? *threshold : cfg.value("threshold", opts.threshold);
  opts.min_len = min_len ? *min_len : cfg.value("min_len", opts.min_len);
  const auto ds = load_dataset(dataset_path);
  const auto constraints = default_constraints();

  Dataset chars{ds.alphabet, {}};
  json manifest = json::array();
  std::size_t failed = 0, ambiguous = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    json entry{{"sample", i}};
    try {
      auto r = split_equation(ds.samples[i], ds.alphabet, constraints, opts);
      entry["assignment"] = r.assignment;
      entry["ambiguous"] = r.ambiguous;
      entry["strokes"] = r.strokes;
      entry["first_character"] = chars.samples.size();
      ambiguous += r.ambiguous ? 1 : 0;
      for (auto& c : r.characters) chars.samples.push_back(std::move(c));
    } catch (const Error& e) {
      entry["error"] = e.what();
      err << "sample " << i << ": " << e.what() << "\n";
      ++failed;
    }
    manifest.push_back(entry);
  }
  write_file(out_dir / "characters.json", dataset_to_json(chars).dump());
  write_file(out_dir / "manifest.json", manifest.dump(2));
  out << json{{"equations", ds.samples.size()},
              {"characters", chars.samples.size()},
              {"ambiguous", ambiguous},
              {"failed", failed}}
             .dump()
      << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_train(const Globals& g, const std::string& dataset_path, const std::string& folds_path, int fold,
              std::string loss_name, std::optional<std::size_t> epochs, const std::string& resume_path,
              std::ostream& out) {
  const fs::path out_dir = g.require_out();
  nn::ModelConfig model_cfg = g.section("model").get<nn::ModelConfig>();
  nn::TrainConfig train_cfg = g.section("train").get<nn::TrainConfig>();
  train_cfg.seed = g.require_seed();
  if (epochs) train_cfg.epochs = *epochs;
  if (loss_name.empty()) loss_name = g.config.value("loss", std::string("ctc"));
  nn::LossSelector loss = nn::LossSelector::parse(loss_name);
  if (g.config.contains("loss_params")) loss.params = g.config["loss_params"].get<LossParams>();
  if (g.config.contains("class_prior")) loss.class_prior = g.config["class_prior"].get<std::vector<double>>();
  model_cfg.validate();
  train_cfg.validate();
  loss.params.validate();

  const auto ds = load_dataset(dataset_path);
  Fold f;
  if (folds_path.empty()) {
    for (std::size_t i = 0; i < ds.samples.size(); ++i) f.train.push_back(i);
  } else {
    const auto plan = fold_plan_from_json(read_json(folds_path));
    if (fold < 0 || static_cast<std::size_t>(fold) >= plan.folds.size())
      throw ArgumentError("--fold must lie in [0, " + std::to_string(plan.folds.size()) + ")");
    f = plan.folds[static_cast<std::size_t>(fold)];
  }

  std::optional<nn::TrainResult> resume;
  if (!resume_path.empty()) {
    auto ckpt = nn::load_checkpoint(resume_path);
    if (!(ckpt.alphabet == ds.alphabet)) throw ArgumentError("checkpoint alphabet differs from the dataset");
    resume = std::move(ckpt.state);
  }

  fs::create_directories(out_dir);
  const fs::path history_path = out_dir / "history.jsonl", ckpt_path = out_dir / "checkpoint.ckpt";
  std::string history;
  if (resume)
    for (const auto& r : resume->history) history += nn::to_json(r).dump() + "\n";
  write_file(history_path, history);

  nn::Checkpoint ckpt{ds.alphabet, train_cfg, loss, {}};
  if (resume) ckpt.state.history = resume->history;
  const auto on_epoch = [&](const nn::EpochRecord& rec, const nn::Model& model, const nn::AdamState& adam) {
    const std::string line = nn::to_json(rec).dump();
    std::ofstream(history_path, std::ios::app) << line << "\n";
    out << line << "\n";
    ckpt.state.model = model;
    ckpt.state.adam = adam;
    ckpt.state.history.push_back(rec);
    nn::save_checkpoint(ckpt_path, ckpt);
  };
  auto result = nn::train(ds, f, model_cfg, train_cfg, loss, on_epoch, resume ? &*resume : nullptr);
  ckpt.state = std::move(result);
  nn::save_checkpoint(ckpt_path, ckpt);
  return 0;
}

struct Predictions {
  Alphabet alphabet;
  std::vector<Sequence> refs, hyps;
  std::vector<std::size_t> indices;
};

Predictions run_model(const std::string& ckpt_path, const std::string& dataset_path, const std::string& folds_path,
                      int fold, std::optional<std::size_t> beam) {
  auto ckpt = nn::load_checkpoint(ckpt_path);
  const auto ds = load_dataset(dataset_path);
  if (!(ckpt.alphabet == ds.alphabet)) throw ArgumentError("checkpoint alphabet differs from the dataset");
  Predictions p{ds.alphabet, {}, {}, selected_indices(ds, folds_path, fold)};
  p.hyps = nn::predict(ckpt.state.model, ds.samples, p.indices, ckpt.train_cfg.target_len, ckpt.train_cfg.batch_size,
                       beam ? *beam : ckpt.train_cfg.beam_width);
  for (auto i : p.indices) p.refs.push_back(ds.samples[i].label);
  return p;
}

int cmd_evaluate(const Globals& g, const std::string& ref_path, const std::string& hyp_path,
                 const std::string& ckpt_path, const std::string& dataset_path, const std::string& folds_path, int fold,
                 std::optional<std::size_t> beam, bool split_words, std::size_t bins, std::ostream& out) {
  if (bins == 0) throw ArgumentError("--bins must be at least 1");
  json result;
  std::vector<WordSequence> ref_words, hyp_words;
  if (!ckpt_path.empty()) {
    if (dataset_path.empty()) throw ArgumentError("--checkpoint needs --dataset");
    const auto p = run_model(ckpt_path, dataset_path, folds_path, fold, beam);
    for (std::size_t i = 0; i < p.refs.size(); ++i) {
      ref_words.push_back(words_of(decode_label(p.refs[i], p.alphabet), split_words));
      hyp_words.push_back(words_of(decode_label(p.hyps[i], p.alphabet), split_words));
    }
    result = report(p.refs, p.hyps, p.alphabet, ref_words, hyp_words, bins);
  } else {
    if (ref_path.empty() || hyp_path.empty()) throw ArgumentError("evaluate needs --ref and --hyp, or --checkpoint");
    const auto ref_lines = split_lines(read_file(ref_path));
    const auto hyp_lines = split_lines(read_file(hyp_path));
    if (ref_lines.size() != hyp_lines.size())
      throw ArgumentError("reference and hypothesis files have " + std::to_string(ref_lines.size()) + " and " +
                          std::to_string(hyp_lines.size()) + " lines");
    std::vector<std::string> all(ref_lines);
    all.insert(all.end(), hyp_lines.begin(), hyp_lines.end());
    std::vector<std::string> nonempty;
    for (const auto& s : all)
      if (!s.empty()) nonempty.push_back(s);
    const Alphabet alphabet = nonempty.empty() ? Alphabet{} : build_alphabet(nonempty);
    std::vector<Sequence> refs, hyps;
    for (std::size_t i = 0; i < ref_lines.size(); ++i) {
      refs.push_back(encode_label(ref_lines[i], alphabet));
      hyps.push_back(encode_label(hyp_lines[i], alphabet));
      ref_words.push_back(words_of(ref_lines[i], split_words));
      hyp_words.push_back(words_of(hyp_lines[i], split_words));
    }
    result = report(refs, hyps, alphabet, ref_words, hyp_words, bins);
  }
  const std::string text = result.dump(2);
  if (!g.out_dir.empty()) write_file(fs::path(g.out_dir) / "evaluation.json", text);
  out << text << "\n";
  return 0;
}

int cmd_decode(const Globals& g, const std::string& ckpt_path, const std::string& dataset_path,
               const std::string& folds_path, int fold, std::optional<std::size_t> beam, std::ostream& out) {
  const auto p = run_model(ckpt_path, dataset_path, folds_path, fold, beam);
  std::string text;
  for (const auto& h : p.hyps) text += decode_label(h, p.alphabet) + "\n";
  if (!g.out_dir.empty()) write_file(fs::path(g.out_dir) / "predictions.txt", text);
  out << text;
  return 0;
}

int cmd_gradcheck(const Globals& g, std::size_t draws, const std::vector<std::string>& only, std::ostream& out) {
  GradCheckOptions opts;
  opts.draws = draws;
  opts.seed = g.seed ? *g.seed : g.config.value("seed", std::uint64_t{0});
  const auto names = only.empty() ? gradcheck_names() : only;
  json rows = json::array();
  bool ok = true;
  out << std::left << std::setw(18) << "check" << std::right << std::setw(8) << "draws" << std::setw(10) << "entries"
      << std::setw(15) << "max_rel_err" << "  status\n";
  for (const auto& n : names) {
    const auto r = gradcheck(n, opts);
    const bool pass = r.max_rel_error < kGradTolerance;
    ok = ok && pass;
    out << std::left << std::setw(18) << r.name << std::right << std::setw(8) << r.draws << std::setw(10) << r.entries
        << std::setw(15) << std::scientific << std::setprecision(3) << r.max_rel_error << std::defaultfloat << "  "
        << (pass ? "ok" : "FAIL") << "\n";
    rows.push_back({{"name", r.name}, {"draws", r.draws}, {"entries", r.entries}, {"redraws", r.redraws},
                    {"max_rel_error", r.max_rel_error}, {"pass", pass}});
  }
  if (!g.out_dir.empty())
    write_file(fs::path(g.out_dir) / "gradcheck.json",
               json{{"tolerance", kGradTolerance}, {"step", opts.step}, {"kink_margin", opts.kink_margin}, {"checks", rows}}.dump(2));
  return ok ? 0 : 1;
}

}  // namespace

std::uint64_t dataset_hash(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const auto mix_u64 = [&](std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    mix(bytes, 8);
  };
  for (const auto& s : ds.samples) {
    mix_u64(s.length);
    mix_u64(s.channels);
    mix_u64(static_cast<std::uint64_t>(s.writer_id));
    mix_u64(s.label.size());
    for (int c : s.label) mix_u64(static_cast<std::uint64_t>(c));
    for (double v : s.values) mix_u64(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"IMU pen handwriting recognition toolkit"};
  app.name(args.empty() ? "imupen" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Root seed for every random choice");
  app.add_option("--config", g.config_path, "JSON config mirroring the typed configs")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory");

  std::string raw, labels, alphabet = "auto";
  auto* ingest = app.add_subcommand("ingest", "Parse a recording and its labels into a dataset file");
  ingest->add_option("--raw", raw, "Sensor recording (header + CSV rows)")->required();
  ingest->add_option("--labels", labels, "JSON-lines label file")->required();
  ingest->add_option("--alphabet", alphabet, "auto or equations");

  std::string dataset, mode, folds;
  std::optional<int> k;
  auto* split = app.add_subcommand("split", "Make WD or WI cross-validation folds");
  split->add_option("--dataset", dataset)->required();
  split->add_option("--mode", mode, "WD or WI");
  split->add_option("--k", k, "Number of folds");

  std::vector<std::string> methods;
  auto* aug = app.add_subcommand("augment", "Apply seeded augmentation to every sample");
  aug->add_option("--dataset", dataset)->required();
  aug->add_option("--methods", methods, "scale,shift,jitter,mag_warp,time_warp");

  std::optional<double> threshold;
  std::optional<std::size_t> min_len;
  auto* seg = app.add_subcommand("segment", "Split equation samples into characters by strokes");
  seg->add_option("--dataset", dataset)->required();
  seg->add_option("--threshold", threshold, "Pen-down force threshold");
  seg->add_option("--min-len", min_len, "Shortest stroke in timesteps");

  int fold = 0;
  std::string loss, resume, checkpoint;
  std::optional<std::size_t> epochs, beam;
  auto* tr = app.add_subcommand("train", "Train a model on one fold");
  tr->add_option("--dataset", dataset)->required();
  tr->add_option("--folds", folds, "Fold plan; without it every sample is used for training");
  tr->add_option("--fold", fold);
  tr->add_option("--loss", loss, "ctc or a character loss");
  tr->add_option("--epochs", epochs);
  tr->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

  std::string ref, hyp;
  bool words = false;
  std::size_t bins = 10;
  auto* ev = app.add_subcommand("evaluate", "CER/WER/CRR, error positions and confusions");
  ev->add_option("--ref", ref, "Reference labels, one per line");
  ev->add_option("--hyp", hyp, "Hypothesis labels, one per line");
  ev->add_option("--checkpoint", checkpoint);
  ev->add_option("--dataset", dataset);
  ev->add_option("--folds", folds);
  ev->add_option("--fold", fold);
  ev->add_option("--beam", beam);
  ev->add_flag("--words", words, "Split labels into whitespace-separated words for WER");
  ev->add_option("--bins", bins, "Error-position histogram bins");

  auto* dec = app.add_subcommand("decode", "Print decoded labels for a dataset");
  dec->add_option("--checkpoint", checkpoint)->required();
  dec->add_option("--dataset", dataset)->required();
  dec->add_option("--folds", folds);
  dec->add_option("--fold", fold);
  dec->add_option("--beam", beam);

  std::size_t draws = 100;
  std::vector<std::string> only;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of every loss and layer");
  gc->add_option("--draws", draws);
  gc->add_option("--only", only, "Restrict to named checks");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (!g.config_path.empty()) {
      g.config = read_json(g.config_path);
      if (!g.config.is_object()) throw FormatError(g.config_path + ": config must be a JSON object");
    }
    if (*ingest) return cmd_ingest(g, raw, labels, alphabet, out);
    if (*split) return cmd_split(g, dataset, mode, k, out);
    if (*aug) return cmd_augment(g, dataset, methods, out);
    if (*seg) return cmd_segment(g, dataset, threshold, min_len, out, err);
    if (*tr) return cmd_train(g, dataset, folds, fold, loss, epochs, resume, out);
    if (*ev) return cmd_evaluate(g, ref, hyp, checkpoint, dataset, folds, fold, beam, words, bins, out);
    if (*dec) return cmd_decode(g, checkpoint, dataset, folds, fold, beam, out);
    if (*gc) return cmd_gradcheck(g, draws, only, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace imupen::cli
