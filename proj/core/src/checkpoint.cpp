#include "euph/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "euph/error.hpp"
#include "euph/io.hpp"

namespace euph {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'E', 'W', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

json manifest_json(const CheckpointManifest& m, const std::vector<Parameter>& params) {
  const auto& c = m.classifier;
  json j = {
      {"format", "euph-checkpoint"},
      {"version", kVersion},
      {"variant", std::string(to_string(c.variant))},
      {"classifier",
       {{"lm_backend_id", c.lm_backend_id},
        {"hidden_size", c.hidden_size},
        {"imagery_dim", c.imagery_dim},
        {"max_tokens", c.max_tokens},
        {"threshold", c.threshold},
        {"seed", c.seed},
        {"separator", c.prompt_template.separator}}},
      {"backend", {{"id", c.lm_backend_id}, {"buckets", m.buckets}}},
      {"fold_index", m.fold_index},
      {"val_ids", m.val_ids},
      {"best_epoch", m.best_epoch},
      {"best_val_f1", m.best_val_f1},
      {"train_seed", m.train_seed},
      {"data_digest", m.data_digest},
      {"config_digest", m.config_digest},
      {"tensors", json::array()},
  };
  if (m.imagery) {
    j["imagery"] = {{"t2i_backend", m.imagery->t2i_backend}, {"encoder_backend", m.imagery->encoder_backend},
                    {"encoder_dim", m.imagery->encoder_dim}, {"k", m.imagery->k},
                    {"seed", m.imagery->seed}, {"normalize", m.imagery->normalize}};
  }
  for (const auto& p : params) j["tensors"].push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}});
  return j;
}

CheckpointManifest manifest_from_json(const json& j) {
  CheckpointManifest m;
  if (j.value("format", "") != "euph-checkpoint") throw DataError("not a checkpoint manifest");
  if (j.at("version").get<std::uint32_t>() != kVersion) throw DataError("unsupported checkpoint version");
  auto& c = m.classifier;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  const auto& cj = j.at("classifier");
  c.lm_backend_id = cj.at("lm_backend_id").get<std::string>();
  c.hidden_size = cj.at("hidden_size").get<std::size_t>();
  c.imagery_dim = cj.at("imagery_dim").get<std::size_t>();
  c.max_tokens = cj.at("max_tokens").get<std::size_t>();
  c.threshold = cj.at("threshold").get<double>();
  c.seed = cj.at("seed").get<std::uint64_t>();
  c.prompt_template.separator = cj.at("separator").get<std::string>();
  m.buckets = j.at("backend").at("buckets").get<std::size_t>();
  m.fold_index = j.at("fold_index").get<int>();
  m.val_ids = j.at("val_ids").get<std::vector<std::string>>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.best_val_f1 = j.at("best_val_f1").get<double>();
  m.train_seed = j.at("train_seed").get<std::uint64_t>();
  m.data_digest = j.at("data_digest").get<std::string>();
  m.config_digest = j.at("config_digest").get<std::string>();
  if (auto it = j.find("imagery"); it != j.end()) {
    ImageryProvenance p;
    p.t2i_backend = it->at("t2i_backend").get<std::string>();
    p.encoder_backend = it->at("encoder_backend").get<std::string>();
    p.encoder_dim = it->at("encoder_dim").get<std::size_t>();
    p.k = it->at("k").get<int>();
    p.seed = it->at("seed").get<std::uint64_t>();
    p.normalize = it->at("normalize").get<bool>();
    m.imagery = p;
  }
  return m;
}

}  // namespace

void save_checkpoint(const fs::path& dir, Classifier& model, const CheckpointManifest& manifest) {
  auto params = model.parameters();
  if (manifest.classifier.variant != model.config().variant)
    throw UsageError("checkpoint manifest variant does not match the model");
  // The manifest must be enough to rebuild the model with the same shapes.
  auto expected = make_language_model(manifest.classifier, manifest.buckets)->parameters();
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (i >= params.size() || expected[i].rows != params[i].rows || expected[i].cols != params[i].cols)
      throw UsageError("checkpoint manifest does not describe the model (tensor " + expected[i].name + ")");
  std::string weights(kMagic, sizeof kMagic);
  put_u32(weights, kVersion);
  put_u32(weights, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params)
    for (Eigen::Index i = 0; i < p.size(); ++i) put_u64(weights, std::bit_cast<std::uint64_t>(p.value[i]));
  fs::create_directories(dir);
  write_file_atomic(dir / "weights.bin", weights);
  write_file_atomic(dir / "manifest.json", manifest_json(manifest, params).dump(2) + "\n");
}

CheckpointManifest load_manifest(const fs::path& dir) {
  try {
    return manifest_from_json(json::parse(read_file(dir / "manifest.json")));
  } catch (const json::exception& e) {
    throw DataError(dir.string() + ": malformed manifest: " + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw DataError(dir.string() + ": malformed manifest: " + e.what());
  }
  CheckpointManifest manifest;
  try {
    manifest = manifest_from_json(j);
  } catch (const json::exception& e) {
    throw DataError(dir.string() + ": malformed manifest: " + e.what());
  }
  Classifier model(manifest.classifier, make_language_model(manifest.classifier, manifest.buckets),
                   Projection::zeros(manifest.classifier.imagery_dim, manifest.classifier.hidden_size));
  auto params = model.parameters();
  const auto& table = j.at("tensors");
  if (table.size() != params.size()) throw DataError(dir.string() + ": tensor table does not match the backend");

  const std::string weights = read_file(dir / "weights.bin");
  if (weights.size() < 12 || std::memcmp(weights.data(), kMagic, 4) != 0)
    throw DataError(dir.string() + ": weights.bin has a bad header");
  if (get_le(weights, 4, 4) != kVersion || get_le(weights, 8, 4) != params.size())
    throw DataError(dir.string() + ": weights.bin version or tensor count mismatch");
  std::size_t at = 12;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t];
    if (table[t].at("name").get<std::string>() != p.name || table[t].at("rows").get<Eigen::Index>() != p.rows ||
        table[t].at("cols").get<Eigen::Index>() != p.cols)
      throw DataError(dir.string() + ": tensor " + p.name + " does not match the manifest");
    if (weights.size() < at + 8 * static_cast<std::size_t>(p.size()))
      throw DataError(dir.string() + ": weights.bin is truncated");
    for (Eigen::Index i = 0; i < p.size(); ++i, at += 8) p.value[i] = std::bit_cast<double>(get_le(weights, at, 8));
  }
  if (at != weights.size()) throw DataError(dir.string() + ": trailing bytes in weights.bin");
  return {std::move(model), std::move(manifest)};
}

}  // namespace euph
