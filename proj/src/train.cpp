#include "imupen/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "imupen/ctc.hpp"
#include "imupen/errors.hpp"
#include "imupen/kernels.hpp"
#include "imupen/metrics.hpp"
#include "imupen/rng.hpp"

namespace imupen::nn {

namespace {

// Stream keys for derive_seed.
constexpr std::uint64_t kInitKey = 1, kShuffleKey = 2, kAugmentKey = 3, kDropoutKey = 4;

std::vector<Tensor*> parameter_ptrs(Model& model) {
  std::vector<Tensor*> out;
  for (auto& p : model.parameters()) out.push_back(&p.tensor);
  return out;
}

WordSequence split_words(const std::string& text) {
  WordSequence words;
  std::istringstream in(text);
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::optional<double> opt(double v) {
  if (std::isnan(v)) return std::nullopt;
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  if (target_len == 0) throw ArgumentError("target_len must be at least 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0))
    throw ArgumentError("Adam betas must lie in [0, 1) and eps be positive");
  if (augment) augment->validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
                     {"epochs", c.epochs},               {"seed", c.seed},
                     {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},           {"target_len", c.target_len},
                     {"beam_width", c.beam_width},       {"track_train_metrics", c.track_train_metrics}};
  if (c.augment) {
    j["augment"] = *c.augment;
    auto& methods = j["augment_methods"] = nlohmann::json::array();
    for (auto m : c.augment_methods) methods.push_back(to_string(m));
  }
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.target_len = j.value("target_len", d.target_len);
  c.beam_width = j.value("beam_width", d.beam_width);
  c.track_train_metrics = j.value("track_train_metrics", d.track_train_metrics);
  c.augment.reset();
  c.augment_methods.clear();
  if (j.contains("augment") && !j["augment"].is_null()) {
    c.augment = j["augment"].get<AugmentConfig>();
    for (const auto& m : j.value("augment_methods", nlohmann::json::array()))
      c.augment_methods.insert(parse_augment_method(m.get<std::string>()));
  }
}

LossSelector LossSelector::parse(std::string_view name) {
  LossSelector s;
  if (name != "ctc") s.char_loss = parse_char_loss(name);
  return s;
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"skipped", r.skipped}};
  const auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("val_cer", r.val_cer);
  put("val_wer", r.val_wer);
  put("val_crr", r.val_crr);
  put("train_cer", r.train_cer);
  put("train_wer", r.train_wer);
  put("train_crr", r.train_crr);
  return j;
}

std::vector<Sequence> predict(Model& model, std::span<const Sample> samples, std::span<const std::size_t> indices,
                              std::size_t target_len, std::size_t batch_size, std::size_t beam_width) {
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  for (auto idx : indices)
    if (idx >= samples.size()) throw RangeError("sample index " + std::to_string(idx) + " outside the dataset");
  std::vector<Sequence> out;
  out.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, indices.size() - start);
    std::vector<Sample> prepared;
    prepared.reserve(n);
    for (std::size_t i = 0; i < n; ++i) prepared.push_back(interpolate(samples[indices[start + i]], target_len));
    std::vector<const Sample*> ptrs;
    for (const auto& s : prepared) ptrs.push_back(&s);

    Tape tape;
    const auto fwd = model.forward(tape, stack_samples(ptrs), Mode::kEval);
    const Tensor& lp = tape.value(fwd.log_probs);
    if (model.head() == Head::kSequence) {
      const std::size_t T = lp.dim(1), C = lp.dim(2);
      for (std::size_t b = 0; b < n; ++b) {
        const auto rows = lp.data().subspan(b * T * C, T * C);
        out.push_back(beam_width == 0 ? greedy_decode(rows, T) : beam_decode(rows, T, beam_width));
      }
    } else {
      const std::size_t K = lp.dim(1);
      for (std::size_t b = 0; b < n; ++b) {
        const auto row = lp.data().subspan(b * K, K);
        out.push_back({static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin())});
      }
    }
  }
  return out;
}

Scores score(const Model& model, std::span<const Sequence> references, std::span<const Sequence> hypotheses,
             const Alphabet& alphabet) {
  Scores s;
  if (references.empty()) return s;
  if (model.head() == Head::kCharacter) {
    s.crr = crr(references, hypotheses);
    return s;
  }
  s.cer = opt(cer(references, hypotheses));
  std::vector<WordSequence> ref_words, hyp_words;
  for (std::size_t i = 0; i < references.size(); ++i) {
    ref_words.push_back(split_words(decode_label(references[i], alphabet)));
    hyp_words.push_back(split_words(decode_label(hypotheses[i], alphabet)));
  }
  s.wer = opt(wer(ref_words, hyp_words));
  return s;
}

TrainResult train(const Dataset& dataset, const Fold& fold, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const LossSelector& loss, const EpochCallback& on_epoch, const TrainResult* resume) {
  train_cfg.validate();
  loss.params.validate();
  if (fold.train.empty()) throw ArgumentError("training split is empty");
  const auto& samples = dataset.samples;
  for (auto idx : fold.train)
    if (idx >= samples.size()) throw RangeError("fold index " + std::to_string(idx) + " outside the dataset");
  for (auto idx : fold.val)
    if (idx >= samples.size()) throw RangeError("fold index " + std::to_string(idx) + " outside the dataset");
  const std::size_t K = dataset.alphabet.size();
  if (K == 0) throw ArgumentError("dataset alphabet is empty");
  for (auto idx : fold.train) {
    validate_sample(samples[idx], K);
    if (!loss.is_ctc() && samples[idx].label.size() != 1)
      throw ArgumentError("character losses need single-symbol labels; sample " + std::to_string(idx) + " has " +
                          std::to_string(samples[idx].label.size()));
  }

  ModelConfig cfg = model_cfg;
  cfg.num_classes = K;
  const std::size_t channels = samples[fold.train.front()].channels;

  TrainResult result;
  if (resume) {
    result = *resume;
    if (result.model.head() != loss.head() || result.model.input_channels() != channels ||
        result.model.config().num_classes != K)
      throw ArgumentError("checkpoint does not match the dataset or loss");
  } else {
    result.model = Model(cfg, loss.head(), channels, derive_seed(train_cfg.seed, {kInitKey}));
  }
  Model& model = result.model;
  const AdamConfig adam_cfg = train_cfg.adam();
  std::vector<Tensor*> params = parameter_ptrs(model);

  std::vector<Sequence> train_refs, val_refs;
  for (auto idx : fold.train) train_refs.push_back(samples[idx].label);
  for (auto idx : fold.val) val_refs.push_back(samples[idx].label);

  // Without augmentation the interpolated inputs never change.
  std::vector<Sample> fixed;
  if (!train_cfg.augment) {
    fixed.resize(samples.size());
    for (auto idx : fold.train) fixed[idx] = interpolate(samples[idx], train_cfg.target_len);
  }

  for (std::size_t epoch = result.history.size() + 1; epoch <= train_cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(fold.train.begin(), fold.train.end());
    Rng shuffle_rng = make_rng(train_cfg.seed, {kShuffleKey, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += train_cfg.batch_size, ++step) {
      const std::size_t n = std::min(train_cfg.batch_size, order.size() - start);
      std::vector<Sample> augmented;
      std::vector<const Sample*> batch;
      if (train_cfg.augment) augmented.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[start + i];
        if (train_cfg.augment) {
          const auto seed = derive_seed(train_cfg.seed, {kAugmentKey, epoch, idx});
          augmented.push_back(interpolate(augment(samples[idx], *train_cfg.augment, train_cfg.augment_methods, seed),
                                          train_cfg.target_len));
          batch.push_back(&augmented.back());
        } else {
          batch.push_back(&fixed[idx]);
        }
      }

      Tape tape;
      const auto fwd =
          model.forward(tape, stack_samples(batch), Mode::kTrain, derive_seed(train_cfg.seed, {kDropoutKey, epoch, step}));
      const Tensor& out = loss.is_ctc() ? tape.value(fwd.log_probs) : tape.value(fwd.logits);
      std::vector<Sequence> targets;
      for (const auto* s : batch) targets.push_back(s->label);

      std::vector<double> seed_grad;
      if (loss.is_ctc()) {
        const std::size_t T = out.dim(1), C = out.dim(2);
        auto res = kernels::parallel::ctc_batch(out.data(), n, T, C, targets);
        std::size_t feasible = 0;
        double sum = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          if (res.feasible[b]) {
            ++feasible;
            sum += res.values[b];
          }
        }
        rec.skipped += n - feasible;
        if (feasible == 0) continue;
        for (auto& g : res.grads) g /= static_cast<double>(feasible);
        loss_sum += sum;
        loss_count += feasible;
        seed_grad = std::move(res.grads);
      } else {
        std::vector<int> classes;
        for (const auto& t : targets) classes.push_back(t.front());
        auto res = char_loss(*loss.char_loss, out.data(), n, classes, loss.params, loss.class_prior);
        loss_sum += res.value * static_cast<double>(n);
        loss_count += n;
        seed_grad = std::move(res.grad_logits);
      }

      model.zero_grad();
      tape.backward(loss.is_ctc() ? fwd.log_probs : fwd.logits, seed_grad);
      adam_step(params, result.adam, adam_cfg);
    }
    if (rec.skipped > 0)
      std::cerr << "epoch " << epoch << ": skipped " << rec.skipped << " samples with infeasible CTC targets\n";
    rec.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN();

    if (!fold.val.empty()) {
      const auto hyp = predict(model, samples, fold.val, train_cfg.target_len, train_cfg.batch_size, train_cfg.beam_width);
      const auto s = score(model, val_refs, hyp, dataset.alphabet);
      rec.val_cer = s.cer;
      rec.val_wer = s.wer;
      rec.val_crr = s.crr;
    }
    if (train_cfg.track_train_metrics) {
      const auto hyp =
          predict(model, samples, fold.train, train_cfg.target_len, train_cfg.batch_size, train_cfg.beam_width);
      const auto s = score(model, train_refs, hyp, dataset.alphabet);
      rec.train_cer = s.cer;
      rec.train_wer = s.wer;
      rec.train_crr = s.crr;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, model, result.adam);
  }
  return result;
}

}  // namespace imupen::nn
