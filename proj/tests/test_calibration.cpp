#include <doctest.h>

#include <random>

#include "salgp/calibration.hpp"
#include "salgp/synthetic.hpp"
#include "support.hpp"

using namespace salgp;

namespace {

SyntheticDumps small_data(int n_train = 50, int n_test = 120) {
  SyntheticSpec spec;
  spec.n_train = n_train;
  spec.n_test = n_test;
  spec.layer_dims = {4, 6, 5};
  spec.overconfidence_bias = 2.0;
  spec.label_noise = 0.2;
  spec.seed = 9;
  return generate_dumps(spec);
}

CalibratorConfig config(Method m, std::vector<int> layers, int iters = 15) {
  CalibratorConfig c;
  c.method = m;
  c.layers = std::move(layers);
  c.opt.iters = iters;
  c.opt.learning_rate = 0.05;
  return c;
}

}  // namespace

TEST_CASE("confidence correction arithmetic") {
  const auto same = corrected_confidence(0.8, 0.0, 0.01);
  CHECK(same.mean == 0.8);

  const auto down = corrected_confidence(0.95, -0.30, 0.0);
  CHECK(down.mean == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(down.mean == down.mean_unclamped);

  const auto up = corrected_confidence(0.95, 0.10, 0.0);
  CHECK(up.mean_unclamped == doctest::Approx(1.05).epsilon(1e-15));
  CHECK(up.mean == 1.0);
  CHECK(up.mean_unclamped == up.raw + up.posterior_mean);
}

TEST_CASE("mode parsing") {
  CHECK(CalibrationMode::parse("global").global);
  const auto m = CalibrationMode::parse("local:3");
  CHECK_FALSE(m.global);
  CHECK(m.layer == 3);
  CHECK(m.str() == "local:3");
  for (const char* bad : {"local:", "local:x", "local:0", "Global", ""})
    CHECK_THROWS_AS(CalibrationMode::parse(bad), ArgumentError);
}

TEST_CASE("method names") {
  for (auto m : {Method::single_gp, Method::sal_ml, Method::sal_hl})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(variant_for(Method::sal_ml) == KernelVariant::multilayer_additive);
  CHECK(variant_for(Method::sal_hl) == KernelVariant::hierarchical_layer);
  CHECK_THROWS_AS(parse_method("sal-icm"), ArgumentError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(config(Method::single_gp, {1, 2}).validate(), ArgumentError);
  CHECK_THROWS_AS(config(Method::sal_ml, {}).validate(), ArgumentError);
  auto c = config(Method::sal_ml, {1, 2});
  c.opt.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("training sample layout") {
  const auto data = small_data();
  const auto single = train_calibrator(data.train, config(Method::single_gp, {2}, 3));
  REQUIRE(single.gp.size() == 50);
  for (const auto& s : single.gp.samples) CHECK(s.layer_index == 2);

  const auto ml = train_calibrator(data.train, config(Method::sal_ml, {1, 2, 3}, 3));
  CHECK(ml.gp.size() == 150);
  CHECK(ml.gp.width() == 6);
  CHECK(ml.standardizer.width() == 6);
}

TEST_CASE("global and local predictions of a layered model") {
  const auto data = small_data();
  for (auto m : {Method::sal_ml, Method::sal_hl}) {
    const auto c = train_calibrator(data.train, config(m, {1, 2, 3}));
    const auto g = calibrate(c, data.test, CalibrationMode::parse("global"));
    const auto l = calibrate(c, data.test, CalibrationMode::parse("local:3"));
    REQUIRE(g.records.size() == 120);
    REQUIRE(l.records.size() == 120);
    CHECK(g.records.front().layer == kGlobalLayer);
    CHECK(l.records.front().layer == 3);
    CHECK(to_record(metrics_for(g)) != to_record(metrics_for(l)));
    for (const auto& r : g.records) {
      CHECK(r.mean >= 0.0);
      CHECK(r.mean <= 1.0);
      CHECK(r.variance >= 0.0);
      CHECK(r.mean_unclamped == r.raw + r.posterior_mean);
    }
    CHECK_THROWS_AS(calibrate(c, data.test, CalibrationMode::parse("local:4")), ArgumentError);
  }
}

TEST_CASE("single-layer model only predicts at its own layer") {
  const auto data = small_data();
  const auto c = train_calibrator(data.train, config(Method::single_gp, {2}, 3));
  CHECK(calibrate(c, data.test, CalibrationMode::parse("global")).records.size() == 120);
  CHECK(calibrate(c, data.test, CalibrationMode::parse("local:2")).records.front().layer == 2);
  CHECK_THROWS_AS(calibrate(c, data.test, CalibrationMode::parse("local:1")), ArgumentError);
}

TEST_CASE("identity calibration reproduces the uncalibrated metrics") {
  const auto data = small_data();
  const auto a = metrics_for(identity_calibration(data.test));
  const auto b = uncalibrated_metrics(data.test, data.test.softmax);
  CHECK(a.ece == b.ece);
  CHECK(a.mce == b.mce);
  CHECK(a.nll == b.nll);
  CHECK(a.brier == b.brier);
  CHECK(a.accuracy == b.accuracy);
  CHECK_FALSE(a.mean_variance.has_value());
}

TEST_CASE("fitted GP beats the zero predictor on prior-drawn residuals") {
  using namespace salgp::testing;
  const auto spec = make_spec(KernelVariant::single_sum, BaseKind::matern52);
  auto truth = default_hyperparams<double>(spec);
  truth.base = {0.5, 1.5, 0.3, 0.2};
  truth.noise = 0.02;
  std::mt19937_64 rng(71);
  auto s = random_samples(rng, 160, 2, spec);
  MatrixXd k = kernel_matrix(std::span<const Sample>(s), spec, truth);
  k.diagonal().array() += truth.noise;
  const MatrixXd l = Eigen::LLT<MatrixXd>(k).matrixL();
  std::normal_distribution<double> nd;
  const VectorXd y = l * VectorXd::NullaryExpr(160, [&] { return nd(rng); });
  for (std::size_t i = 0; i < s.size(); ++i) s[i].residual = y[static_cast<Eigen::Index>(i)];

  const std::vector<Sample> train(s.begin(), s.begin() + 100), test(s.begin() + 100, s.end());
  const auto m = fit(train, spec, default_hyperparams<double>(spec), FitOptions{100, 0.05, 0});
  double gp = 0, zero = 0;
  for (const auto& q : test) {
    const double e = predict_local(m, q).mean - q.residual;
    gp += e * e;
    zero += q.residual * q.residual;
  }
  CHECK(gp < zero);
}
