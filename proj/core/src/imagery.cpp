#include "euph/imagery.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "euph/error.hpp"
#include "euph/hash.hpp"
#include "euph/io.hpp"
#include "euph/random.hpp"

namespace euph {

namespace fs = std::filesystem;

Image StubTextToImage::generate(std::string_view text, std::uint64_t seed, int index) {
  ++calls_;
  FieldHasher h;
  h.add("stub-t2i").add(text).add(static_cast<std::int64_t>(seed)).add(static_cast<std::int64_t>(index));
  auto d = h.digest();
  return Image::solid(size_, size_, d[0], d[1], d[2]);
}

Eigen::VectorXd StubVisualEncoder::encode(const Image& image) {
  auto d = sha256(image.bytes());
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(d[i]) << (8 * i);
  Rng rng(seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

std::unique_ptr<TextToImageBackend> make_t2i_backend(std::string_view id) {
  if (id == "stub" || id == "stub-t2i") return std::make_unique<StubTextToImage>();
  throw BackendError("unknown text-to-image backend '" + std::string(id) + "'");
}

std::unique_ptr<VisualEncoder> make_visual_encoder(std::string_view id, std::size_t dim) {
  if (dim == 0) throw UsageError("encoder dimension must be positive");
  if (id == "stub" || id.starts_with("stub-ve")) return std::make_unique<StubVisualEncoder>(dim);
  throw BackendError("unknown visual encoder '" + std::string(id) + "'");
}

std::string cache_key(std::string_view text, std::string_view backend_id, std::uint64_t seed, int k_index) {
  FieldHasher h;
  h.add("image").add(text).add(backend_id).add(static_cast<std::int64_t>(seed)).add(static_cast<std::int64_t>(k_index));
  return h.hex_digest();
}

std::string imagery_digest(std::string_view text, std::string_view t2i_id, std::string_view encoder_id,
                           std::uint64_t seed, int k, bool normalized) {
  FieldHasher h;
  h.add("embedding").add(text).add(t2i_id).add(encoder_id).add(static_cast<std::int64_t>(seed)).add(
      static_cast<std::int64_t>(k));
  if (normalized) h.add("l2");
  return h.hex_digest();
}

std::string sheet_digest(std::string_view text, std::string_view t2i_id, std::uint64_t seed, int k) {
  FieldHasher h;
  h.add("sheet").add(text).add(t2i_id).add(static_cast<std::int64_t>(seed)).add(static_cast<std::int64_t>(k));
  return h.hex_digest();
}

namespace {

constexpr char kMagic[4] = {'E', 'I', 'M', 'B'};
constexpr std::size_t kHeaderSize = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_embedding(const Eigen::VectorXd& vector, int k) {
  if (k < 1) throw UsageError("encode_embedding: K must be >= 1");
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kEmbeddingVersion);
  put_u32(out, static_cast<std::uint32_t>(vector.size()));
  put_u32(out, static_cast<std::uint32_t>(k));
  for (double x : vector) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  return out;
}

Eigen::VectorXd decode_embedding(std::string_view in, int* k) {
  if (in.size() < kHeaderSize || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
    throw CacheCorruption("embedding: bad magic or short header");
  if (get_u32(in, 4) != kEmbeddingVersion) throw CacheCorruption("embedding: unsupported version");
  const std::uint32_t dim = get_u32(in, 8);
  const std::uint32_t kk = get_u32(in, 12);
  if (in.size() != kHeaderSize + 4ull * dim) throw CacheCorruption("embedding: size does not match header");
  if (kk == 0) throw CacheCorruption("embedding: K is zero");
  Eigen::VectorXd v(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    v[i] = static_cast<double>(std::bit_cast<float>(get_u32(in, kHeaderSize + 4ull * i)));
    if (!std::isfinite(v[i])) throw CacheCorruption("embedding: non-finite component");
  }
  if (k) *k = static_cast<int>(kk);
  return v;
}

ImageryCache::ImageryCache(fs::path root) : root_(std::move(root)) {}

fs::path ImageryCache::image_path(std::string_view key) const {
  return root_ / "images" / std::string(key.substr(0, 2)) / (std::string(key) + ".ppm");
}

fs::path ImageryCache::embedding_path(std::string_view digest) const {
  return root_ / "embeddings" / (std::string(digest) + ".emb");
}

fs::path ImageryCache::sheet_path(std::string_view digest) const {
  return root_ / "sheets" / (std::string(digest) + ".png");
}

std::optional<Image> ImageryCache::get_image(std::string_view key) const {
  auto path = image_path(key);
  if (!fs::exists(path)) return std::nullopt;
  try {
    return decode_ppm(read_file(path));
  } catch (const CacheCorruption& e) {
    throw CacheCorruption(path.string() + ": " + e.what());
  }
}

void ImageryCache::put_image(std::string_view key, const Image& image) const {
  write_file_atomic(image_path(key), encode_ppm(image));
}

std::optional<Eigen::VectorXd> ImageryCache::get_embedding(std::string_view digest, std::size_t dim, int k) const {
  auto path = embedding_path(digest);
  if (!fs::exists(path)) return std::nullopt;
  int stored_k = 0;
  Eigen::VectorXd v;
  try {
    v = decode_embedding(read_file(path), &stored_k);
  } catch (const CacheCorruption& e) {
    throw CacheCorruption(path.string() + ": " + e.what());
  }
  if (static_cast<std::size_t>(v.size()) != dim || stored_k != k)
    throw CacheCorruption(path.string() + ": header (D_v=" + std::to_string(v.size()) + ", K=" +
                          std::to_string(stored_k) + ") does not match request (D_v=" + std::to_string(dim) +
                          ", K=" + std::to_string(k) + ")");
  return v;
}

void ImageryCache::put_embedding(std::string_view digest, const Eigen::VectorXd& vector, int k) const {
  write_file_atomic(embedding_path(digest), encode_embedding(vector, k));
}

bool ImageryCache::has_sheet(std::string_view digest) const { return fs::exists(sheet_path(digest)); }

void ImageryCache::put_sheet(std::string_view digest, const Image& sheet) const {
  write_file_atomic(sheet_path(digest), encode_png(sheet));
}

ImagerySet generate_imagery(std::string_view text, int k, TextToImageBackend& backend, std::uint64_t seed,
                            const ImageryCache* cache) {
  if (k < 1) throw UsageError("generate_imagery: K must be >= 1, got " + std::to_string(k));
  ImagerySet set{std::string(text), seed, {}, backend.id()};
  set.images.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto key = cache_key(text, set.backend_id, seed, i);
    if (cache) {
      if (auto hit = cache->get_image(key)) {
        set.images.push_back(std::move(*hit));
        continue;
      }
    }
    Image img;
    try {
      img = backend.generate(text, seed, i);
    } catch (const std::exception& e) {
      throw BackendError("text-to-image backend " + set.backend_id + " failed after " + std::to_string(i) + " of " +
                         std::to_string(k) + " images: " + e.what());
    }
    if (!img.valid())
      throw BackendError("text-to-image backend " + set.backend_id + " returned an invalid image after " +
                         std::to_string(i) + " of " + std::to_string(k) + " images");
    if (cache) cache->put_image(key, img);
    set.images.push_back(std::move(img));
  }
  return set;
}

ImageryEmbedding embed_imagery(const ImagerySet& set, VisualEncoder& encoder, bool normalize) {
  if (set.images.empty()) throw UsageError("embed_imagery: empty imagery set");
  const auto dim = static_cast<Eigen::Index>(encoder.dim());
  const auto k = static_cast<Eigen::Index>(set.images.size());
  Eigen::MatrixXd enc(dim, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd v = encoder.encode(set.images[static_cast<std::size_t>(i)]);
    if (v.size() != dim)
      throw BackendError("visual encoder " + encoder.id() + " returned dimension " + std::to_string(v.size()) +
                         ", declared " + std::to_string(dim));
    enc.col(i) = v;
  }
  // Each component is summed in sorted order, so the mean does not depend on
  // the order of the images, bit for bit.
  Eigen::VectorXd sum(dim);
  std::vector<double> column(static_cast<std::size_t>(k));
  for (Eigen::Index d = 0; d < dim; ++d) {
    for (Eigen::Index i = 0; i < k; ++i) column[static_cast<std::size_t>(i)] = enc(d, i);
    std::sort(column.begin(), column.end());
    double acc = 0;
    for (double x : column) acc += x;
    sum[d] = acc;
  }
  ImageryEmbedding out;
  out.vector = sum / static_cast<double>(set.images.size());
  if (normalize) {
    const double n = out.vector.norm();
    if (n > 0) out.vector /= n;
  }
  if (!out.vector.allFinite()) throw BackendError("visual encoder " + encoder.id() + " produced non-finite values");
  out.k_used = set.k();
  out.source_digest = imagery_digest(set.source_text, set.backend_id, encoder.id(), set.seed, set.k(), normalize);
  return out;
}

ImageryStore::ImageryStore(ImageryCache cache, std::shared_ptr<TextToImageBackend> t2i,
                           std::shared_ptr<VisualEncoder> encoder, ImageryOptions options)
    : cache_(std::move(cache)), t2i_(std::move(t2i)), encoder_(std::move(encoder)), options_(options) {
  if (!t2i_ || !encoder_) throw UsageError("ImageryStore needs both backends");
  if (options_.k < 1) throw UsageError("ImageryStore: K must be >= 1");
}

std::string ImageryStore::digest_for(std::string_view text) const {
  return imagery_digest(text, t2i_->id(), encoder_->id(), options_.seed, options_.k, options_.normalize);
}

std::string ImageryStore::sheet_digest_for(std::string_view text) const {
  return sheet_digest(text, t2i_->id(), options_.seed, options_.k);
}

std::optional<ImageryEmbedding> ImageryStore::cached_embedding(std::string_view text) const {
  const auto digest = digest_for(text);
  auto v = cache_.get_embedding(digest, encoder_->dim(), options_.k);
  if (!v) return std::nullopt;
  return ImageryEmbedding{std::move(*v), options_.k, digest};
}

ImagerySet ImageryStore::images_for(std::string_view text) {
  std::lock_guard lock(backend_mu_);
  return generate_imagery(text, options_.k, *t2i_, options_.seed, &cache_);
}

ImageryEmbedding ImageryStore::embedding_for(std::string_view text) {
  const auto digest = digest_for(text);
  std::promise<ImageryEmbedding> promise;
  std::shared_future<ImageryEmbedding> fut;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto it = inflight_.find(digest);
    if (it != inflight_.end()) {
      fut = it->second;
    } else {
      fut = promise.get_future().share();
      inflight_.emplace(digest, fut);
      owner = true;
    }
  }
  if (!owner) return fut.get();

  try {
    ImageryEmbedding result;
    if (auto hit = cached_embedding(text)) {
      result = std::move(*hit);
    } else {
      ++computations_;
      auto set = images_for(text);
      ImageryEmbedding fresh;
      {
        std::lock_guard lock(backend_mu_);
        fresh = embed_imagery(set, *encoder_, options_.normalize);
      }
      const auto bytes = encode_embedding(fresh.vector, fresh.k_used);
      write_file_atomic(cache_.embedding_path(digest), bytes);
      result = ImageryEmbedding{decode_embedding(bytes), fresh.k_used, digest};
    }
    promise.set_value(result);
    std::lock_guard lock(mu_);
    inflight_.erase(digest);
    return result;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(mu_);
    inflight_.erase(digest);
    throw;
  }
}

std::string ImageryStore::sheet_for(std::string_view text) {
  const auto digest = sheet_digest_for(text);
  const auto rel = fs::relative(cache_.sheet_path(digest), cache_.root()).generic_string();
  std::promise<std::string> promise;
  std::shared_future<std::string> fut;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto it = sheets_inflight_.find(digest);
    if (it != sheets_inflight_.end()) {
      fut = it->second;
    } else {
      fut = promise.get_future().share();
      sheets_inflight_.emplace(digest, fut);
      owner = true;
    }
  }
  if (!owner) return fut.get();
  try {
    if (!cache_.has_sheet(digest)) {
      auto set = images_for(text);
      cache_.put_sheet(digest, contact_sheet(set.images, options_.sheet_tile));
    }
    promise.set_value(rel);
    std::lock_guard lock(mu_);
    sheets_inflight_.erase(digest);
    return rel;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(mu_);
    sheets_inflight_.erase(digest);
    throw;
  }
}

}  // namespace euph
