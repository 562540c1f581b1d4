#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "salgp/ingest.hpp"
#include "salgp/standardizer.hpp"

using namespace salgp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("salgp_ingest_" + name);
  fs::remove_all(p);
  return p;
}

LayerTensor tensor(int index, std::vector<std::int64_t> shape, std::mt19937_64& rng) {
  LayerTensor t;
  t.layer_index = index;
  t.shape = std::move(shape);
  std::int64_t size = 1;
  for (auto d : t.shape) size *= d;
  std::normal_distribution<float> nd;
  t.values.resize(static_cast<std::size_t>(size));
  for (auto& v : t.values) v = nd(rng);
  return t;
}

// N=4, K=3 with two layers: one spatial, one flat
FeatureDump small_dump() {
  std::mt19937_64 rng(1);
  FeatureDump d;
  d.split_name = "train";
  d.layers = {tensor(1, {4, 2, 2, 2}, rng), tensor(2, {4, 5}, rng)};
  d.softmax.resize(4, 3);
  d.softmax << 0.5, 0.25, 0.25, 0.125, 0.75, 0.125, 0.25, 0.25, 0.5, 0.5, 0.375, 0.125;
  d.labels = {0, 1, 1, 2};
  d.predictions = {0, 1, 2, 0};
  MatrixXd logits = d.softmax.array().log();
  d.logits = logits;
  return d;
}

}  // namespace

TEST_CASE("dump round trip") {
  const auto dir = scratch("roundtrip");
  const auto d = small_dump();
  write_dump(d, dir);
  const auto r = load_dump(dir);
  CHECK(r.split_name == "train");
  REQUIRE(r.layers.size() == 2);
  CHECK(r.layers[0].shape == d.layers[0].shape);
  CHECK(r.layers[0].values == d.layers[0].values);
  CHECK(r.layers[1].values == d.layers[1].values);
  CHECK(r.softmax == d.softmax);
  CHECK(r.labels == d.labels);
  CHECK(r.predictions == d.predictions);
  REQUIRE(r.logits.has_value());
  CHECK((*r.logits - *d.logits).cwiseAbs().maxCoeff() < 1e-6);
  fs::remove_all(dir);
}

TEST_CASE("short layer file is a shape mismatch") {
  const auto dir = scratch("short");
  write_dump(small_dump(), dir);
  fs::resize_file(dir / "layer_2.f32", 3 * 5 * sizeof(float));
  try {
    load_dump(dir);
    FAIL("expected a DumpError");
  } catch (const DumpError& e) {
    CHECK(std::string(e.what()).find("shape mismatch") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("missing manifest is reported") {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  CHECK_THROWS_AS(load_dump(dir), DumpError);
  fs::remove_all(dir);
}

TEST_CASE("unnormalized softmax row is named") {
  auto d = small_dump();
  d.softmax.row(2) << 0.5, 0.3, 0.1;
  d.predictions[2] = 0;
  try {
    d.validate();
    FAIL("expected a DumpError");
  } catch (const DumpError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("prediction must be the argmax") {
  auto d = small_dump();
  d.predictions[1] = 0;
  CHECK_THROWS_AS(d.validate(), DumpError);
}

TEST_CASE("channel pooling") {
  LayerTensor t;
  t.layer_index = 1;
  t.shape = {1, 2, 1, 1};
  t.values = {1.0f, 3.0f};
  CHECK(pool_channels(t, PoolingMode::max).values == std::vector<float>{3.0f});
  CHECK(pool_channels(t, PoolingMode::avg).values == std::vector<float>{2.0f});

  std::mt19937_64 rng(4);
  const auto r = tensor(1, {1, 2, 2, 2}, rng);
  const auto p = pool_channels(r, PoolingMode::avg);
  REQUIRE(p.shape == std::vector<std::int64_t>{1, 4});
  for (int h = 0; h < 2; ++h)
    for (int w = 0; w < 2; ++w) {
      const auto hw = static_cast<std::size_t>(h * 2 + w);
      const float expected = (r.values[hw] + r.values[4 + hw]) / 2.0f;
      CHECK(p.values[hw] == expected);
    }

  const auto flat = tensor(3, {4, 5}, rng);
  CHECK(pool_channels(flat, PoolingMode::max).values == flat.values);
}

TEST_CASE("sample construction") {
  FeatureDump d;
  d.softmax.resize(2, 2);
  d.softmax << 0.875, 0.125, 0.875, 0.125;
  d.labels = {0, 1};
  d.predictions = {0, 0};
  LayerTensor a;
  a.layer_index = 1;
  a.shape = {2, 3};
  a.values = {1, 2, 3, 4, 5, 6};
  LayerTensor b;
  b.layer_index = 2;
  b.shape = {2, 5};
  b.values = {1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
  d.layers = {a, b};

  const auto s = build_samples(d, PoolingMode::avg, {1, 2});
  REQUIRE(s.size() == 4);
  for (const auto& x : s) CHECK(x.features.size() == 5);
  CHECK(s[0].layer_index == 1);
  CHECK(s[0].features[3] == 0.0);
  CHECK(s[0].features[4] == 0.0);
  CHECK(s[0].confidence == 0.875);
  CHECK(s[0].correctness == 1);
  CHECK(s[0].residual == 0.125);
  CHECK(s[1].correctness == 0);
  CHECK(s[1].residual == -0.875);
  CHECK(s[2].layer_index == 2);

  const auto only = build_samples(d, PoolingMode::avg, {1});
  CHECK(only.front().features.size() == 3);
  CHECK_THROWS_AS(build_samples(d, PoolingMode::avg, {4}), ArgumentError);
}

TEST_CASE("layer list parsing") {
  CHECK(parse_layer_list("1-5") == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(parse_layer_list("1,3") == std::vector<int>{1, 3});
  CHECK(parse_layer_list("1-3,5") == std::vector<int>{1, 2, 3, 5});
  CHECK_THROWS(parse_layer_list("3-1"));
  CHECK_THROWS(parse_layer_list("a"));
}

TEST_CASE("standardizer") {
  std::vector<Sample> s(3);
  for (int i = 0; i < 3; ++i) {
    s[static_cast<std::size_t>(i)].features = VectorXd(2);
    s[static_cast<std::size_t>(i)].features << i, 4.0;
  }
  const auto z = Standardizer::fit(s);
  const VectorXd a = z.apply(s[2].features);
  CHECK(a[1] == 0.0);  // constant column is only centred
  CHECK(a[0] > 0.0);
  auto copy = s;
  z.apply_in_place(copy);
  double mean = 0;
  for (const auto& x : copy) mean += x.features[0];
  CHECK(std::abs(mean) < 1e-12);
  CHECK_THROWS_AS(z.apply(VectorXd::Zero(3)), ArgumentError);
}
