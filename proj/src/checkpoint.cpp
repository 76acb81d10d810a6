#include "imupen/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "imupen/errors.hpp"

namespace imupen::nn {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'U', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) throw FormatError("checkpoint is truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

struct Entry {
  std::string name;
  Shape shape;
  std::vector<double>* data;
};

std::optional<double> opt_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").is_null() ? std::nan("") : j.at("train_loss").get<double>();
  r.skipped = j.value("skipped", std::size_t{0});
  r.val_cer = opt_field(j, "val_cer");
  r.val_wer = opt_field(j, "val_wer");
  r.val_crr = opt_field(j, "val_crr");
  r.train_cer = opt_field(j, "train_cer");
  r.train_wer = opt_field(j, "train_wer");
  r.train_crr = opt_field(j, "train_crr");
  return r;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  // Copies keep the manifest code uniform; checkpoints are small.
  Checkpoint c = ckpt;
  Model& model = c.state.model;
  std::vector<Entry> entries;
  std::vector<std::vector<double>> owned;
  owned.reserve(model.parameters().size() + 2);
  for (auto& p : model.parameters()) {
    owned.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    entries.push_back({p.name, p.tensor.shape(), &owned.back()});
  }
  auto& bn = model.batchnorm_state();
  if (bn.initialized) {
    entries.push_back({"bn.running_mean", {bn.running_mean.size()}, &bn.running_mean});
    entries.push_back({"bn.running_var", {bn.running_var.size()}, &bn.running_var});
  }
  auto& adam = c.state.adam;
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    const auto& p = model.parameters().at(i);
    entries.push_back({"adam.m/" + p.name, p.tensor.shape(), &adam.m[i]});
    entries.push_back({"adam.v/" + p.name, p.tensor.shape(), &adam.v[i]});
  }

  nlohmann::json header;
  header["format"] = "imupen-checkpoint";
  header["model"] = model.config();
  header["head"] = to_string(model.head());
  header["input_channels"] = model.input_channels();
  header["train"] = c.train_cfg;
  header["alphabet"] = c.alphabet.symbols();
  header["loss"] = c.loss.name();
  header["loss_params"] = c.loss.params;
  header["class_prior"] = c.loss.class_prior;
  header["adam_step"] = adam.step;
  header["batchnorm_initialized"] = bn.initialized;
  auto& history = header["history"] = nlohmann::json::array();
  for (const auto& r : c.state.history) history.push_back(to_json(r));
  auto& manifest = header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    manifest.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
    offset += e.data->size();
  }

  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& e : entries)
    for (double v : *e.data) put_le<double>(out, v);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint file");
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, 12);
  if (20 + header_len > bytes.size()) throw FormatError("checkpoint header is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(20, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const std::string_view block = bytes.substr(20 + header_len);

  Checkpoint c;
  try {
    c.alphabet = Alphabet(header.at("alphabet").get<std::vector<std::string>>());
    c.train_cfg = header.at("train").get<TrainConfig>();
    c.loss = LossSelector::parse(header.at("loss").get<std::string>());
    c.loss.params = header.at("loss_params").get<LossParams>();
    c.loss.class_prior = header.value("class_prior", std::vector<double>{});
    const auto cfg = header.at("model").get<ModelConfig>();
    c.state.model = Model(cfg, parse_head(header.at("head").get<std::string>()),
                          header.at("input_channels").get<std::size_t>(), 0);
    c.state.adam.step = header.at("adam_step").get<std::uint64_t>();
    for (const auto& r : header.at("history")) c.state.history.push_back(epoch_record_from_json(r));

    Model& model = c.state.model;
    auto& bn = model.batchnorm_state();
    bn.initialized = header.value("batchnorm_initialized", false);
    std::map<std::string, std::pair<Shape, std::size_t>> manifest;
    for (const auto& t : header.at("tensors"))
      manifest[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(), t.at("offset").get<std::size_t>()};

    const auto load = [&](const std::string& name, const Shape& shape, std::span<double> dst) {
      const auto it = manifest.find(name);
      if (it == manifest.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
      if (it->second.first != shape)
        throw FormatError("tensor '" + name + "' has shape " + shape_string(it->second.first) + ", expected " +
                          shape_string(shape));
      for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = get_le<double>(block, (it->second.second + i) * sizeof(double));
    };
    for (auto& p : model.parameters()) load(p.name, p.tensor.shape(), p.tensor.data());
    if (bn.initialized) {
      const std::size_t F = cfg.conv_filters;
      bn.running_mean.assign(F, 0.0);
      bn.running_var.assign(F, 1.0);
      load("bn.running_mean", {F}, bn.running_mean);
      load("bn.running_var", {F}, bn.running_var);
    }
    if (manifest.count("adam.m/" + model.parameters().front().name)) {
      for (auto& p : model.parameters()) {
        auto& m = c.state.adam.m.emplace_back(p.tensor.size());
        auto& v = c.state.adam.v.emplace_back(p.tensor.size());
        load("adam.m/" + p.name, p.tensor.shape(), m);
        load("adam.v/" + p.name, p.tensor.shape(), v);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace imupen::nn
