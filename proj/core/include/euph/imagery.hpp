#pragma once

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "euph/image.hpp"

namespace euph {

inline constexpr int kDefaultImageryK = 9;

// Text-to-image contract: one image per (text, seed, index).
class TextToImageBackend {
 public:
  virtual ~TextToImageBackend() = default;
  virtual std::string id() const = 0;
  virtual bool deterministic() const = 0;
  virtual Image generate(std::string_view text, std::uint64_t seed, int index) = 0;
};

// Visual-encoder contract: image -> vector of constant dimension dim().
class VisualEncoder {
 public:
  virtual ~VisualEncoder() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Eigen::VectorXd encode(const Image& image) = 0;
};

// Solid-colour image whose colour is a hash of (text, seed, index).
class StubTextToImage final : public TextToImageBackend {
 public:
  explicit StubTextToImage(int size = 32) : size_(size) {}
  std::string id() const override { return "stub-t2i"; }
  bool deterministic() const override { return true; }
  Image generate(std::string_view text, std::uint64_t seed, int index) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  int size_;
  std::atomic<std::size_t> calls_{0};
};

// Pseudo-random vector in [-1, 1]^dim seeded by a hash of the image bytes.
class StubVisualEncoder final : public VisualEncoder {
 public:
  explicit StubVisualEncoder(std::size_t dim = 64) : dim_(dim) {}
  std::string id() const override { return "stub-ve-" + std::to_string(dim_); }
  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd encode(const Image& image) override;

 private:
  std::size_t dim_;
};

// Backend factories keyed by id. Only the stub backends ship built in.
std::unique_ptr<TextToImageBackend> make_t2i_backend(std::string_view id);
std::unique_ptr<VisualEncoder> make_visual_encoder(std::string_view id, std::size_t dim);

struct ImagerySet {
  std::string source_text;
  std::uint64_t seed = 0;
  std::vector<Image> images;
  std::string backend_id;

  int k() const { return static_cast<int>(images.size()); }
};

struct ImageryEmbedding {
  Eigen::VectorXd vector;
  int k_used = 0;
  std::string source_digest;
};

// Key of one cached image. Hex SHA-256 over length-prefixed fields.
std::string cache_key(std::string_view text, std::string_view backend_id, std::uint64_t seed, int k_index);

// Identity of a mean embedding: (text, generator, encoder, seed, K).
std::string imagery_digest(std::string_view text, std::string_view t2i_id, std::string_view encoder_id,
                           std::uint64_t seed, int k, bool normalized = false);

// Identity of a contact sheet; independent of the encoder.
std::string sheet_digest(std::string_view text, std::string_view t2i_id, std::uint64_t seed, int k);

// Sidecar embedding file: 16-byte header (magic "EIMB", version, D_v, K, all
// little-endian uint32) followed by D_v little-endian float32 values.
inline constexpr std::uint32_t kEmbeddingVersion = 1;
std::string encode_embedding(const Eigen::VectorXd& vector, int k);
// Throws CacheCorruption unless the header and size are consistent.
Eigen::VectorXd decode_embedding(std::string_view bytes, int* k = nullptr);

// Content-addressed on-disk cache:
//   <root>/images/<kk>/<key>.ppm
//   <root>/embeddings/<digest>.emb
//   <root>/sheets/<digest>.png
// All writes are atomic renames.
class ImageryCache {
 public:
  explicit ImageryCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path image_path(std::string_view key) const;
  std::filesystem::path embedding_path(std::string_view digest) const;
  std::filesystem::path sheet_path(std::string_view digest) const;

  std::optional<Image> get_image(std::string_view key) const;
  void put_image(std::string_view key, const Image& image) const;

  // Returns nullopt on a miss; throws CacheCorruption if the file exists but
  // disagrees with the expected dimension or K.
  std::optional<Eigen::VectorXd> get_embedding(std::string_view digest, std::size_t dim, int k) const;
  void put_embedding(std::string_view digest, const Eigen::VectorXd& vector, int k) const;

  bool has_sheet(std::string_view digest) const;
  void put_sheet(std::string_view digest, const Image& sheet) const;

 private:
  std::filesystem::path root_;
};

// Produces K images, consulting the cache first and populating it on a miss.
// A backend failure part-way reports how many images were produced.
ImagerySet generate_imagery(std::string_view text, int k, TextToImageBackend& backend, std::uint64_t seed,
                            const ImageryCache* cache);

// Arithmetic mean of the K encoder outputs, optionally L2-normalised.
ImageryEmbedding embed_imagery(const ImagerySet& set, VisualEncoder& encoder, bool normalize = false);

struct ImageryOptions {
  int k = kDefaultImageryK;
  std::uint64_t seed = 0;
  bool normalize = false;
  int sheet_tile = 64;
};

// Get-or-compute facade over generator, encoder and cache. Concurrent
// requests for the same text share one computation. Embeddings are always
// returned as stored on disk (float32 precision), so hits and misses agree.
class ImageryStore {
 public:
  ImageryStore(ImageryCache cache, std::shared_ptr<TextToImageBackend> t2i, std::shared_ptr<VisualEncoder> encoder,
               ImageryOptions options = {});

  ImageryEmbedding embedding_for(std::string_view text);
  // Cache-only lookup; nullopt if the embedding was never computed.
  std::optional<ImageryEmbedding> cached_embedding(std::string_view text) const;

  // Ensures the contact sheet exists; returns its path relative to the root.
  std::string sheet_for(std::string_view text);

  std::string digest_for(std::string_view text) const;
  std::string sheet_digest_for(std::string_view text) const;

  const ImageryCache& cache() const { return cache_; }
  const ImageryOptions& options() const { return options_; }
  std::size_t encoder_dim() const { return encoder_->dim(); }
  std::size_t computations() const { return computations_.load(); }

 private:
  ImagerySet images_for(std::string_view text);

  ImageryCache cache_;
  std::shared_ptr<TextToImageBackend> t2i_;
  std::shared_ptr<VisualEncoder> encoder_;
  ImageryOptions options_;

  std::mutex mu_;
  std::map<std::string, std::shared_future<ImageryEmbedding>> inflight_;
  std::map<std::string, std::shared_future<std::string>> sheets_inflight_;
  std::mutex backend_mu_;
  std::atomic<std::size_t> computations_{0};
};

}  // namespace euph
