#include <doctest.h>

#include <cmath>
#include <random>

#include "salgp/baselines.hpp"
#include "salgp/ingest.hpp"
#include "salgp/metrics.hpp"

using namespace salgp;

namespace {

struct LogitSet {
  MatrixXd logits;
  std::vector<int> labels;
};

// Correct-class logit inflated x3 on a label set with 30% noise.
LogitSet overconfident(std::uint64_t seed, int n = 400, int k = 4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> cls(0, k - 1);
  LogitSet s{MatrixXd(n, k), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int truth = cls(rng);
    for (int j = 0; j < k; ++j) s.logits(i, j) = nd(rng);
    s.logits(i, truth) += 1.0;
    s.logits.row(i) *= 3.0;
    int label = truth;
    if (std::bernoulli_distribution(0.3)(rng)) label = (truth + 1 + cls(rng) % (k - 1)) % k;
    s.labels[static_cast<std::size_t>(i)] = label;
  }
  return s;
}

LogitSet all_correct_high_margin(int n = 200, int k = 3) {
  LogitSet s{MatrixXd::Zero(n, k), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int c = i % k;
    s.logits(i, c) = 8.0 + 0.01 * (i % 7);
    s.labels[static_cast<std::size_t>(i)] = c;
  }
  return s;
}

}  // namespace

TEST_CASE("temperature gradient matches central differences") {
  const auto s = overconfident(1);
  for (double t : {0.5, 1.0, 2.0}) {
    const double h = 1e-6 * t;
    const double fd = (temperature_loss(s.logits, s.labels, t + h) -
                       temperature_loss(s.logits, s.labels, t - h)) /
                      (2 * h);
    const double g = temperature_gradient(s.logits, s.labels, t);
    CHECK(std::abs(g - fd) / std::max(std::abs(fd), 1e-12) < 1e-6);
  }
}

TEST_CASE("overconfident logits are softened") {
  const auto s = overconfident(2);
  const auto m = fit_temperature(s.logits, s.labels);
  CHECK(m.temperature > 1.0);
  CHECK(temperature_loss(s.logits, s.labels, m.temperature) <
        temperature_loss(s.logits, s.labels, 1.0));
}

TEST_CASE("all-correct high-margin set drives the temperature to the floor") {
  const auto s = all_correct_high_margin();
  const auto m = fit_temperature(s.logits, s.labels);
  CHECK(m.temperature == kTemperatureFloor);
  REQUIRE(m.trace.size() > 1);
  for (std::size_t i = 1; i < m.trace.size(); ++i)
    CHECK(m.trace[i].temperature <= m.trace[i - 1].temperature);
}

TEST_CASE("applying a temperature") {
  const auto s = overconfident(3, 50);
  MatrixXd soft = s.logits;
  for (Eigen::Index i = 0; i < soft.rows(); ++i) {
    const VectorXd e = (soft.row(i).array() - soft.row(i).maxCoeff()).exp();
    soft.row(i) = e / e.sum();
  }
  CHECK((apply_temperature(s.logits, 1.0) - soft).cwiseAbs().maxCoeff() < 1e-15);

  const MatrixXd unit = s.logits / 3.0;
  const MatrixXd flat = apply_temperature(unit, 1e6);
  CHECK((flat.array() - 1.0 / flat.cols()).abs().maxCoeff() < 1e-6);

  for (double t : {0.05, 0.7, 3.0, 40.0}) {
    const MatrixXd p = apply_temperature(s.logits, t);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      Eigen::Index a = 0, b = 0;
      p.row(i).maxCoeff(&a);
      s.logits.row(i).maxCoeff(&b);
      CHECK(a == b);
    }
  }
  CHECK_THROWS(apply_temperature(s.logits, 0.0));
}

TEST_CASE("logits fall back to log-softmax") {
  FeatureDump d;
  d.softmax.resize(1, 2);
  d.softmax << 0.75, 0.25;
  d.labels = {0};
  d.predictions = {0};
  bool recovered = false;
  const MatrixXd l = dump_logits(d, &recovered);
  CHECK(recovered);
  CHECK((apply_temperature(l, 1.0) - d.softmax).cwiseAbs().maxCoeff() < 1e-12);
}
