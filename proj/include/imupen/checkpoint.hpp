#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "imupen/dataio.hpp"
#include "imupen/train.hpp"

namespace imupen::nn {

/// Everything needed to evaluate a model or resume its training.
struct Checkpoint {
  Alphabet alphabet;
  TrainConfig train_cfg;
  LossSelector loss;
  TrainResult state;
};

/// File layout: the 8 bytes "IMUPCKPT", a u32 format version, a u64 header
/// length, a UTF-8 JSON header, then every tensor listed in the header's
/// manifest as little-endian f64 values at its recorded offset.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

EpochRecord epoch_record_from_json(const nlohmann::json& j);

}  // namespace imupen::nn
