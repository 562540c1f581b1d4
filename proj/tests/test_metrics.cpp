#include <doctest.h>

#include <cmath>
#include <random>

#include "salgp/metrics.hpp"

using namespace salgp;

TEST_CASE("single pair lands in its bin") {
  const std::vector<double> c{0.7};
  const std::vector<int> y{1};
  const auto d = reliability(c, y, 10);
  REQUIRE(d.bins.size() == 10);
  CHECK(d.bins[6].count == 1);  // (0.6, 0.7]
  CHECK(d.bins[6].accuracy == 1.0);
  CHECK(d.bins[6].mean_confidence == 0.7);
}

TEST_CASE("bins are right-inclusive") {
  CHECK(bin_index(0.1, 10) == 0);
  CHECK(bin_index(0.10000001, 10) == 1);
  CHECK(bin_index(0.0, 10) == 0);
  CHECK(bin_index(1.0, 10) == 9);
  CHECK(bin_index(1.0 / 15.0, 15) == 0);
}

TEST_CASE("two-sample hand computation") {
  const std::vector<double> c{0.95, 0.95};
  const std::vector<int> y{0, 1};
  const auto d = reliability(c, y, 10);
  CHECK(ece(d) == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(mce(d) == doctest::Approx(0.45).epsilon(1e-15));
}

TEST_CASE("perfect calibration") {
  // each bin holds confidence 0.75 with 3 of 4 correct
  const std::vector<double> c{0.75, 0.75, 0.75, 0.75, 0.25, 0.25, 0.25, 0.25};
  const std::vector<int> y{1, 1, 1, 0, 1, 0, 0, 0};
  const auto d = reliability(c, y, 10);
  CHECK(ece(d) == 0.0);
  CHECK(mce(d) == 0.0);
}

TEST_CASE("reliability matches a counting oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(0, 1);
  std::vector<double> c(100);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = ud(rng);
    y[i] = ud(rng) < c[i];
  }
  const int m = 15;
  const auto d = reliability(c, y, m);
  std::size_t total = 0;
  double e = 0, worst = 0;
  for (int b = 0; b < m; ++b) {
    std::size_t count = 0;
    double sc = 0, sy = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] > double(b) / m && c[i] <= double(b + 1) / m) {
        ++count;
        sc += c[i];
        sy += y[i];
      }
    CHECK(d.bins[static_cast<std::size_t>(b)].count == count);
    total += count;
    if (count) {
      CHECK(d.bins[static_cast<std::size_t>(b)].mean_confidence == doctest::Approx(sc / count).epsilon(1e-14));
      CHECK(d.bins[static_cast<std::size_t>(b)].accuracy == doctest::Approx(sy / count).epsilon(1e-14));
      const double gap = std::abs(sy / count - sc / count);
      e += double(count) / c.size() * gap;
      worst = std::max(worst, gap);
    }
  }
  CHECK(total == c.size());
  CHECK(ece(d) == doctest::Approx(e).epsilon(1e-13));
  CHECK(mce(d) == doctest::Approx(worst).epsilon(1e-13));
}

TEST_CASE("ece never exceeds mce") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(0, 1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<double> c(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = ud(rng);
      y[i] = ud(rng) < 0.5;
    }
    const auto d = reliability(c, y, 1 + static_cast<int>(rng() % 20));
    CHECK(ece(d) <= mce(d) + 1e-15);
  }
}

TEST_CASE("binary nll and brier") {
  const double eps = kProbEpsilon;
  std::vector<double> c{1.0 - eps};
  std::vector<int> y{1};
  CHECK(nll_binary(c, y) == doctest::Approx(eps).epsilon(1e-6));
  CHECK(brier_binary(c, y) < 1e-12);

  c = {0.5};
  for (int v : {0, 1}) {
    y = {v};
    CHECK(nll_binary(c, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(brier_binary(c, y) == 0.25);
  }

  c = {0.9, 0.6, 0.3, 0.8};
  y = {1, 0, 0, 1};
  const double nll = -(std::log(0.9) + std::log(0.4) + std::log(0.7) + std::log(0.8)) / 4;
  const double brier = (0.01 + 0.36 + 0.09 + 0.04) / 4;
  CHECK(nll_binary(c, y) == doctest::Approx(nll).epsilon(1e-14));
  CHECK(brier_binary(c, y) == doctest::Approx(brier).epsilon(1e-14));
}

TEST_CASE("multiclass nll and brier") {
  MatrixXd p(2, 3);
  p << 0.7, 0.2, 0.1, 0.1, 0.3, 0.6;
  const std::vector<int> y{0, 1};
  CHECK(nll_multiclass(p, y) == doctest::Approx(-(std::log(0.7) + std::log(0.3)) / 2).epsilon(1e-14));
  const double b = ((0.09 + 0.04 + 0.01) + (0.01 + 0.49 + 0.36)) / 2;
  CHECK(brier_multiclass(p, y) == doctest::Approx(b).epsilon(1e-14));
}

TEST_CASE("report record is stable") {
  const std::vector<double> c{0.95, 0.95, 0.4};
  const std::vector<int> y{0, 1, 1};
  const auto r = compute_metrics(c, y);
  CHECK(r.n == 3);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3));
  CHECK(to_record(r) == to_record(compute_metrics(c, y)));
  CHECK(to_record(r).find("ece=") != std::string::npos);
  CHECK(r == compute_metrics(c, y));
}

TEST_CASE("mismatched inputs are rejected") {
  const std::vector<double> c{0.5, 0.5};
  const std::vector<int> y{1};
  CHECK_THROWS(reliability(c, y, 10));
  CHECK_THROWS(reliability(c, std::vector<int>{1, 0}, 0));
}
