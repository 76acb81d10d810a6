#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "imupen/cli.hpp"
#include "json.hpp"
#include "support/synthetic.hpp"

namespace imupen::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "imupen");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("imupen_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // A small sequence dataset written as recording + label files.
  void write_recording_files() {
    const auto ds = synth::sequence_dataset(10, 3, 1, 3, 4, 6, 8);
    const auto text = write_recording(ds.samples, ds.alphabet);
    spit(dir_ / "rec.txt", text.raw);
    spit(dir_ / "labels.jsonl", text.labels);
  }

  fs::path ingest() {
    write_recording_files();
    const auto r = invoke({"--out", (dir_ / "ds").string(), "ingest", "--raw", (dir_ / "rec.txt").string(),
                           "--labels", (dir_ / "labels.jsonl").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return dir_ / "ds" / "dataset.json";
  }

  fs::path tiny_config() {
    const json cfg{{"model",
                    {{"conv_filters", 4}, {"bilstm_units", 3}, {"bilstm_layers", 1}, {"dropout_rate", 0.1}}},
                   {"train", {{"learning_rate", 1e-2}, {"batch_size", 4}, {"target_len", 20}}}};
    spit(dir_ / "config.json", cfg.dump());
    return dir_ / "config.json";
  }

  fs::path dir_;
};

TEST_F(Cli, IngestPrintsSummary) {
  ingest();
  const auto r = invoke({"--out", (dir_ / "ds2").string(), "ingest", "--raw", (dir_ / "rec.txt").string(), "--labels",
                         (dir_ / "labels.jsonl").string()});
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["samples"], 10);
  EXPECT_EQ(j["writers"], 5);
  EXPECT_EQ(j["num_classes"], 3);
  std::size_t total = 0;
  for (const auto& [sym, n] : j["class_histogram"].items()) total += n.get<std::size_t>();
  EXPECT_GE(total, 10u);
  EXPECT_TRUE(fs::exists(dir_ / "ds2" / "dataset.json"));
}

TEST_F(Cli, MissingInputIsAnError) {
  const auto r = invoke({"--out", dir_.string(), "ingest", "--raw", (dir_ / "nope.txt").string(), "--labels",
                         (dir_ / "nope.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u) << r.err;
  EXPECT_NE(invoke({"frobnicate"}).code, 0);
  EXPECT_NE(invoke({}).code, 0);
}

TEST_F(Cli, SplitNeedsSeed) {
  const auto ds = ingest();
  EXPECT_EQ(invoke({"--out", dir_.string(), "split", "--dataset", ds.string(), "--k", "2"}).code, 1);
  const auto r = invoke({"--seed", "3", "--out", dir_.string(), "split", "--dataset", ds.string(), "--k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto plan = fold_plan_from_json(json::parse(slurp(dir_ / "folds.json")));
  EXPECT_EQ(plan.folds.size(), 2u);
}

TEST_F(Cli, EvaluateTextFiles) {
  spit(dir_ / "ref.txt", "1+2=3\n4-1=3\n");
  spit(dir_ / "hyp.txt", "1+2=3\n4-1=3\n");
  auto r = invoke({"evaluate", "--ref", (dir_ / "ref.txt").string(), "--hyp", (dir_ / "hyp.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["cer"], 0.0);
  EXPECT_EQ(j["wer"], 0.0);
  EXPECT_EQ(j["pairs"], 2);

  spit(dir_ / "ref.txt", "kitten\n\n");
  spit(dir_ / "hyp.txt", "sitting\nx\n");
  r = invoke({"--out", dir_.string(), "evaluate", "--ref", (dir_ / "ref.txt").string(), "--hyp",
              (dir_ / "hyp.txt").string(), "--bins", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["cer"].get<double>(), 4.0 / 6.0);
  EXPECT_EQ(j["histograms"]["mismatch"], (std::vector<int>{1, 1}));
  EXPECT_TRUE(fs::exists(dir_ / "evaluation.json"));

  spit(dir_ / "ref.txt", "\n");
  spit(dir_ / "hyp.txt", "ab\n");
  r = invoke({"evaluate", "--ref", (dir_ / "ref.txt").string(), "--hyp", (dir_ / "hyp.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(json::parse(r.out)["cer"].is_null());

  spit(dir_ / "hyp.txt", "a\nb\n");
  EXPECT_EQ(invoke({"evaluate", "--ref", (dir_ / "ref.txt").string(), "--hyp", (dir_ / "hyp.txt").string()}).code, 1);
}

TEST_F(Cli, AugmentHashIsSeeded) {
  const auto ds = ingest();
  spit(dir_ / "aug.json", json{{"augment", {{"force_channel", 3}, {"accelerometer_channels", {0, 1}}}}}.dump());
  const std::string cfg = (dir_ / "aug.json").string();
  auto run_with = [&](const std::string& seed) {
    const auto r = invoke({"--seed", seed, "--config", cfg, "--out", (dir_ / ("aug" + seed)).string(), "augment", "--dataset",
                           ds.string(), "--methods", "scale,time_warp"});
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(r.out)["hash"].get<std::string>();
  };
  EXPECT_EQ(run_with("5"), run_with("5"));
  EXPECT_NE(run_with("5"), run_with("6"));
  EXPECT_EQ(invoke({"--seed", "1", "--config", cfg, "--out", dir_.string(), "augment", "--dataset", ds.string(),
                    "--methods", "crop"})
                .code,
            1);
  // The default force channel (12) does not exist in four-channel data.
  EXPECT_EQ(invoke({"--seed", "1", "--out", dir_.string(), "augment", "--dataset", ds.string()}).code, 1);
}

TEST_F(Cli, SegmentWritesManifest) {
  Rng rng = make_rng(1, {});
  Dataset ds{equations_alphabet(), {}};
  ds.samples.push_back(synth::equation(encode_label("1+2", ds.alphabet), {1, 2, 1}, rng).sample);
  ds.samples.push_back(synth::equation(encode_label("47", ds.alphabet), {2, 1}, rng).sample);
  spit(dir_ / "eq.json", dataset_to_json(ds).dump());
  const auto r = invoke({"--out", dir_.string(), "segment", "--dataset", (dir_ / "eq.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = json::parse(r.out);
  EXPECT_EQ(summary["characters"], 5);
  EXPECT_EQ(summary["ambiguous"], 1);
  const auto manifest = json::parse(slurp(dir_ / "manifest.json"));
  EXPECT_EQ(manifest[0]["assignment"], (std::vector<int>{1, 2, 1}));
  EXPECT_EQ(manifest[1]["ambiguous"], true);
  EXPECT_EQ(dataset_from_json(json::parse(slurp(dir_ / "characters.json"))).samples.size(), 5u);

  ds.samples.push_back(synth::equation(encode_label("1", ds.alphabet), {1, 1}, rng).sample);
  spit(dir_ / "eq.json", dataset_to_json(ds).dump());
  const auto bad = invoke({"--out", dir_.string(), "segment", "--dataset", (dir_ / "eq.json").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("sample 2"), std::string::npos);
}

TEST_F(Cli, TrainIsReproducibleAndResumable) {
  const auto ds = ingest();
  const auto cfg = tiny_config();
  auto train_into = [&](const std::string& name, const std::string& epochs, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"--seed", "9", "--config", cfg.string(), "--out", (dir_ / name).string(),
                                  "train", "--dataset", ds.string(), "--epochs", epochs};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = invoke(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return slurp(dir_ / name / "history.jsonl");
  };
  const auto one = train_into("a", "1");
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 1);
  EXPECT_TRUE(json::parse(one.substr(0, one.find('\n'))).contains("train_loss"));

  const auto three = train_into("b", "3");
  EXPECT_EQ(three, train_into("c", "3"));
  EXPECT_EQ(std::count(three.begin(), three.end(), '\n'), 3);

  train_into("d", "1");
  const auto resumed = train_into("d2", "3", {"--resume", (dir_ / "d" / "checkpoint.ckpt").string()});
  EXPECT_EQ(resumed, three);
  EXPECT_EQ(slurp(dir_ / "d2" / "checkpoint.ckpt"), slurp(dir_ / "b" / "checkpoint.ckpt"));

  const auto dec = invoke({"--out", (dir_ / "pred").string(), "decode", "--checkpoint",
                           (dir_ / "b" / "checkpoint.ckpt").string(), "--dataset", ds.string()});
  ASSERT_EQ(dec.code, 0) << dec.err;
  EXPECT_EQ(std::count(dec.out.begin(), dec.out.end(), '\n'), 10);
  EXPECT_EQ(slurp(dir_ / "pred" / "predictions.txt"), dec.out);

  const auto ev = invoke({"evaluate", "--checkpoint", (dir_ / "b" / "checkpoint.ckpt").string(), "--dataset",
                          ds.string(), "--beam", "3"});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto j = json::parse(ev.out);
  EXPECT_EQ(j["pairs"], 10);
  EXPECT_GE(j["cer"].get<double>(), 0.0);
}

TEST_F(Cli, GradcheckTable) {
  const auto r = invoke({"--out", dir_.string(), "gradcheck", "--draws", "5", "--only", "cce", "dense"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cce"), std::string::npos);
  EXPECT_NE(r.out.find("dense"), std::string::npos);
  const auto j = json::parse(slurp(dir_ / "gradcheck.json"));
  EXPECT_EQ(j["checks"].size(), 2u);
  EXPECT_EQ(invoke({"gradcheck", "--only", "nonesuch"}).code, 1);
}

}  // namespace
}  // namespace imupen::cli
