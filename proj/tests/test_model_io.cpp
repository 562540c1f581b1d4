#include <doctest.h>

#include <filesystem>

#include "salgp/model_io.hpp"
#include "salgp/synthetic.hpp"

using namespace salgp;

namespace {

Calibrator trained(Method m, std::vector<int> layers) {
  SyntheticSpec spec;
  spec.n_train = 30;
  spec.n_test = 10;
  spec.layer_dims = {3, 4};
  spec.overconfidence_bias = 1.5;
  spec.label_noise = 0.2;
  CalibratorConfig c;
  c.method = m;
  c.layers = std::move(layers);
  c.opt.iters = 5;
  c.opt.learning_rate = 0.05;
  return train_calibrator(generate_dumps(spec).train, c);
}

}  // namespace

TEST_CASE("model archive round trip") {
  for (auto [m, layers] : {std::pair{Method::single_gp, std::vector<int>{2}},
                           std::pair{Method::sal_ml, std::vector<int>{1, 2}},
                           std::pair{Method::sal_hl, std::vector<int>{1, 2}}}) {
    const auto c = trained(m, layers);
    const auto text = serialize_model(c);
    const auto back = deserialize_model(text);
    CHECK(serialize_model(back) == text);
    CHECK(back.config.method == m);
    CHECK(back.gp.size() == c.gp.size());
    CHECK((back.gp.dual - c.gp.dual).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.gp.chol - c.gp.chol).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("model files on disk") {
  const auto c = trained(Method::sal_ml, {1, 2});
  const auto path = std::filesystem::temp_directory_path() / "salgp_model_io.json";
  save_model(c, path);
  CHECK(serialize_model(load_model(path)) == serialize_model(c));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), Error);
}

TEST_CASE("malformed archives are rejected") {
  CHECK_THROWS_AS(deserialize_model("not json"), Error);
  CHECK_THROWS_AS(deserialize_model(R"({"format":"other","version":1})"), Error);
  CHECK_THROWS_AS(deserialize_model(R"({"format":"salgp-model","version":99})"), Error);
  CHECK_THROWS_AS(deserialize_model(R"({"format":"salgp-model","version":1})"), Error);
}
