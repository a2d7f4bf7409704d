#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "euph/classifier.hpp"

namespace euph {

struct ImageryProvenance {
  std::string t2i_backend;
  std::string encoder_backend;
  std::size_t encoder_dim = 0;
  int k = 0;
  std::uint64_t seed = 0;
  bool normalize = false;
};

struct CheckpointManifest {
  ClassifierConfig classifier;
  std::size_t buckets = 4096;
  int fold_index = -1;
  std::vector<std::string> val_ids;
  int best_epoch = 0;
  double best_val_f1 = 0;
  std::uint64_t train_seed = 0;
  std::string data_digest;
  std::string config_digest;
  std::optional<ImageryProvenance> imagery;
};

// A checkpoint is a directory:
//   manifest.json  configuration, provenance, tensor table
//   weights.bin    "EWTS", version, tensor count (uint32 LE), then each
//                  tensor's float64 LE values in the table's order
void save_checkpoint(const std::filesystem::path& dir, Classifier& model, const CheckpointManifest& manifest);

struct LoadedCheckpoint {
  Classifier model;
  CheckpointManifest manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);
CheckpointManifest load_manifest(const std::filesystem::path& dir);

}  // namespace euph
