#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <thread>

#include "euph/error.hpp"
#include "euph/image.hpp"
#include "euph/imagery.hpp"
#include "euph/io.hpp"
#include "euph/random.hpp"
#include "helpers.hpp"

using namespace euph;
namespace fs = std::filesystem;

namespace {

// Encoder returning a preset vector per image, keyed by the red channel.
class TableEncoder final : public VisualEncoder {
 public:
  explicit TableEncoder(std::map<int, Eigen::VectorXd> table) : table_(std::move(table)) {
    dim_ = static_cast<std::size_t>(table_.begin()->second.size());
  }
  std::string id() const override { return "table"; }
  std::size_t dim() const override { return dim_; }
  Eigen::VectorXd encode(const Image& img) override { return table_.at(img.rgb[0]); }

 private:
  std::map<int, Eigen::VectorXd> table_;
  std::size_t dim_;
};

class FlakyBackend final : public TextToImageBackend {
 public:
  explicit FlakyBackend(int fail_at) : fail_at_(fail_at) {}
  std::string id() const override { return "flaky"; }
  bool deterministic() const override { return true; }
  Image generate(std::string_view, std::uint64_t, int index) override {
    if (index == fail_at_) throw std::runtime_error("GPU out of memory");
    return Image::solid(2, 2, 1, 2, 3);
  }

 private:
  int fail_at_;
};

class WrongDimEncoder final : public VisualEncoder {
 public:
  std::string id() const override { return "wrong"; }
  std::size_t dim() const override { return 4; }
  Eigen::VectorXd encode(const Image&) override { return Eigen::VectorXd::Zero(3); }
};

ImagerySet set_of(const std::vector<int>& reds) {
  ImagerySet s{"text", 0, {}, "test"};
  for (int r : reds) s.images.push_back(Image::solid(1, 1, static_cast<std::uint8_t>(r), 0, 0));
  return s;
}

std::map<int, Eigen::VectorXd> random_table(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::map<int, Eigen::VectorXd> t;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(dim);
    for (auto& x : v) x = uniform(rng, -10.0, 10.0);
    t[i] = v;
  }
  return t;
}

std::unique_ptr<ImageryStore> stub_store(const fs::path& root, int k = kDefaultImageryK) {
  return std::make_unique<ImageryStore>(ImageryCache(root), std::make_shared<StubTextToImage>(),
                                        std::make_shared<StubVisualEncoder>(16), ImageryOptions{k, 0, false, 16});
}

}  // namespace

TEST_SUITE("imagery") {
  TEST_CASE("cache keys are deterministic and separate their inputs") {
    CHECK(cache_key("late", "stub-t2i", 0, 0) == cache_key("late", "stub-t2i", 0, 0));
    CHECK(cache_key("late", "stub-t2i", 0, 0) != cache_key("pass on", "stub-t2i", 0, 0));
    CHECK(cache_key("late", "stub-t2i", 0, 0) != cache_key("late", "stub-t2i", 0, 1));
    CHECK(cache_key("late", "stub-t2i", 0, 0) != cache_key("late", "stub-t2i", 1, 0));
    CHECK(cache_key("late", "stub-t2i", 0, 0) != cache_key("late", "other", 0, 0));
    // Length-prefixed fields: moving a boundary changes the key.
    CHECK(cache_key("ab", "c", 0, 0) != cache_key("a", "bc", 0, 0));
    CHECK(cache_key("late", "stub-t2i", 0, 0).size() == 64);
  }

  TEST_CASE("K=9 default produces nine images, K=0 is rejected") {
    StubTextToImage t2i;
    const auto set = generate_imagery("late", kDefaultImageryK, t2i, 0, nullptr);
    CHECK(set.k() == 9);
    CHECK(set.images[0] != set.images[1]);
    CHECK_THROWS_AS(generate_imagery("late", 0, t2i, 0, nullptr), UsageError);
  }

  TEST_CASE("second call is served from the cache, bit-identical") {
    test::TempDir tmp;
    ImageryCache cache(tmp.path());
    StubTextToImage t2i;
    const auto first = generate_imagery("senior citizen", 9, t2i, 5, &cache);
    CHECK(t2i.calls() == 9);
    const auto second = generate_imagery("senior citizen", 9, t2i, 5, &cache);
    CHECK(t2i.calls() == 9);
    CHECK(first.images == second.images);
  }

  TEST_CASE("backend failure part-way reports progress") {
    FlakyBackend t2i(3);
    try {
      generate_imagery("late", 9, t2i, 0, nullptr);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(std::string(e.what()).find("after 3 of 9") != std::string::npos);
    }
  }

  TEST_CASE("identical images average to their encoding") {
    TableEncoder enc({{7, (Eigen::VectorXd(3) << 0.1, -2.5, 3.0).finished()}});
    const auto e = embed_imagery(set_of({7, 7, 7, 7, 7, 7, 7, 7, 7}), enc);
    CHECK(e.k_used == 9);
    CHECK((e.vector - (Eigen::VectorXd(3) << 0.1, -2.5, 3.0).finished()).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("mean of (1,0) and (0,1) is (0.5,0.5)") {
    TableEncoder enc({{0, Eigen::Vector2d(1, 0)}, {1, Eigen::Vector2d(0, 1)}});
    const auto e = embed_imagery(set_of({0, 1}), enc);
    CHECK(e.vector[0] == 0.5);
    CHECK(e.vector[1] == 0.5);
  }

  TEST_CASE("random set mean matches a summation oracle") {
    auto table = random_table(9, 32, 99);
    TableEncoder enc(table);
    const auto e = embed_imagery(set_of({0, 1, 2, 3, 4, 5, 6, 7, 8}), enc);
    for (int d = 0; d < 32; ++d) {
      long double sum = 0;
      for (int i = 0; i < 9; ++i) sum += table[i][d];
      const double oracle = static_cast<double>(sum / 9);
      CHECK(std::abs(e.vector[d] - oracle) <= 1e-12 * std::max(1.0, std::abs(oracle)));
    }
  }

  TEST_CASE("permutation invariance is exact") {
    TableEncoder enc(random_table(9, 64, 3));
    std::vector<int> order = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    const auto ref = embed_imagery(set_of(order), enc).vector;
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      shuffle(order, rng);
      CHECK(embed_imagery(set_of(order), enc).vector == ref);
    }
  }

  TEST_CASE("K=1 is the identity") {
    auto table = random_table(1, 64, 4);
    TableEncoder enc(table);
    CHECK(embed_imagery(set_of({0}), enc).vector == table[0]);
  }

  TEST_CASE("duplicating every image leaves the mean unchanged") {
    TableEncoder enc(random_table(9, 64, 5));
    const auto once = embed_imagery(set_of({0, 1, 2, 3, 4, 5, 6, 7, 8}), enc).vector;
    const auto twice = embed_imagery(set_of({0, 1, 2, 3, 4, 5, 6, 7, 8, 0, 1, 2, 3, 4, 5, 6, 7, 8}), enc).vector;
    CHECK((once - twice).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("normalisation is opt-in") {
    TableEncoder enc({{0, Eigen::Vector2d(3, 4)}});
    CHECK(embed_imagery(set_of({0}), enc, false).vector.norm() == doctest::Approx(5.0));
    CHECK(embed_imagery(set_of({0}), enc, true).vector.norm() == doctest::Approx(1.0));
    CHECK(embed_imagery(set_of({0}), enc, false).source_digest != embed_imagery(set_of({0}), enc, true).source_digest);
  }

  TEST_CASE("encoder dimension mismatch is a backend error") {
    WrongDimEncoder enc;
    CHECK_THROWS_AS(embed_imagery(set_of({0}), enc), BackendError);
    CHECK_THROWS_AS(embed_imagery(ImagerySet{}, enc), UsageError);
  }

  TEST_CASE("embedding files round-trip and reject damage") {
    Eigen::VectorXd v(5);
    v << 0.5, -1.25, 3.0, 0, 1e-3;
    const auto bytes = encode_embedding(v, 9);
    CHECK(bytes.size() == 16 + 5 * 4);
    CHECK(bytes.substr(0, 4) == "EIMB");
    int k = 0;
    const auto back = decode_embedding(bytes, &k);
    CHECK(k == 9);
    CHECK((back - v).cwiseAbs().maxCoeff() < 1e-7);
    CHECK_THROWS_AS(decode_embedding(bytes.substr(0, bytes.size() - 1)), CacheCorruption);
    CHECK_THROWS_AS(decode_embedding("XXXX" + bytes.substr(4)), CacheCorruption);
    CHECK_THROWS_AS(decode_embedding(""), CacheCorruption);
  }

  TEST_CASE("cached embedding must agree with the requested D_v and K") {
    test::TempDir tmp;
    ImageryCache cache(tmp.path());
    cache.put_embedding("abc", Eigen::VectorXd::Ones(4), 9);
    CHECK(cache.get_embedding("abc", 4, 9).has_value());
    CHECK_THROWS_AS(cache.get_embedding("abc", 8, 9), CacheCorruption);
    CHECK_THROWS_AS(cache.get_embedding("abc", 4, 3), CacheCorruption);
    CHECK_FALSE(cache.get_embedding("missing", 4, 9).has_value());
  }

  TEST_CASE("ppm files carry a digest and detect corruption") {
    Image img = Image::solid(3, 2, 10, 20, 30);
    img.rgb[4] = 99;
    const auto ppm = encode_ppm(img);
    CHECK(ppm.find("# sha256 ") != std::string::npos);
    CHECK(decode_ppm(ppm) == img);
    auto damaged = ppm;
    damaged[damaged.size() - 1] ^= 1;
    CHECK_THROWS_AS(decode_ppm(damaged), CacheCorruption);
    CHECK_THROWS_AS(decode_ppm(ppm.substr(0, ppm.size() - 2)), CacheCorruption);
    CHECK_THROWS_AS(decode_ppm("P3\n1 1\n255\n"), CacheCorruption);
  }

  TEST_CASE("a corrupted cached image is reported, not silently reused") {
    test::TempDir tmp;
    ImageryCache cache(tmp.path());
    StubTextToImage t2i;
    generate_imagery("late", 2, t2i, 0, &cache);
    const auto path = cache.image_path(cache_key("late", "stub-t2i", 0, 1));
    auto bytes = read_file(path);
    bytes.back() ^= 0x55;
    write_file_atomic(path, bytes);
    try {
      generate_imagery("late", 2, t2i, 0, &cache);
      FAIL("expected CacheCorruption");
    } catch (const CacheCorruption& e) {
      CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
  }

  TEST_CASE("contact sheet tiles nine images on a 3x3 grid") {
    CHECK(sheet_columns(9) == 3);
    CHECK(sheet_columns(1) == 1);
    CHECK(sheet_columns(10) == 4);
    StubTextToImage t2i(8);
    const auto set = generate_imagery("late", 9, t2i, 0, nullptr);
    const auto sheet = contact_sheet(set.images, 16, 2);
    // Gaps between tiles and around the border.
    CHECK(sheet.width == 3 * 16 + 4 * 2);
    CHECK(sheet.height == 3 * 16 + 4 * 2);
    // Tile (row 1, col 2) is image 5, resampled.
    const auto px = [&](int x, int y) { return sheet.rgb[static_cast<std::size_t>(3 * (y * sheet.width + x))]; };
    CHECK(px(2 * 18 + 3, 18 + 3) == set.images[5].rgb[0]);
    const auto png = encode_png(sheet);
    CHECK(png.substr(1, 3) == "PNG");
  }

  TEST_CASE("store computes once, then serves identical vectors") {
    test::TempDir tmp;
    auto store = stub_store(tmp.path());
    const auto a = store->embedding_for("restroom, toilet");
    CHECK(store->computations() == 1);
    CHECK(a.vector.size() == 16);
    CHECK(a.k_used == 9);
    const auto b = store->embedding_for("restroom, toilet");
    CHECK(store->computations() == 1);
    CHECK(a.vector == b.vector);
    // A fresh store over the same directory hits the disk cache.
    auto again = stub_store(tmp.path());
    CHECK(again->cached_embedding("restroom, toilet")->vector == a.vector);
    CHECK(again->embedding_for("restroom, toilet").vector == a.vector);
    CHECK(again->computations() == 0);
    CHECK_FALSE(again->cached_embedding("never seen").has_value());
  }

  TEST_CASE("concurrent requests for one text share a computation") {
    test::TempDir tmp;
    auto store = stub_store(tmp.path());
    std::vector<std::thread> threads;
    std::vector<Eigen::VectorXd> results(8);
    for (int i = 0; i < 8; ++i)
      threads.emplace_back([&, i] { results[static_cast<std::size_t>(i)] = store->embedding_for("pass on").vector; });
    for (auto& t : threads) t.join();
    CHECK(store->computations() == 1);
    for (const auto& r : results) CHECK(r == results[0]);
  }

  TEST_CASE("sheets are written below the cache root") {
    test::TempDir tmp;
    auto store = stub_store(tmp.path());
    const auto rel = store->sheet_for("late");
    CHECK(rel.rfind("sheets/", 0) == 0);
    CHECK(fs::exists(tmp.path() / rel));
    CHECK(store->sheet_for("late") == rel);
    CHECK(store->sheet_for("old person, elderly") != rel);
  }

  TEST_CASE("backend factories") {
    CHECK(make_t2i_backend("stub")->id() == "stub-t2i");
    CHECK(make_visual_encoder("stub", 8)->dim() == 8);
    CHECK(make_visual_encoder("stub-ve-8", 8)->id() == "stub-ve-8");
    CHECK_THROWS_AS(make_t2i_backend("dalle"), BackendError);
    CHECK_THROWS_AS(make_visual_encoder("clip", 8), BackendError);
  }
}
