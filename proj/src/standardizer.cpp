#include "salgp/standardizer.hpp"

#include <cmath>

namespace salgp {

Standardizer Standardizer::fit(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ArgumentError("cannot fit a standardizer on zero samples");
  const auto d = samples.front().features.size();
  VectorXd sum = VectorXd::Zero(d);
  for (const auto& s : samples) {
    if (s.features.size() != d) throw ArgumentError("feature width mismatch");
    sum += s.features;
  }
  const double n = static_cast<double>(samples.size());
  Standardizer out;
  out.mean = sum / n;
  VectorXd sq = VectorXd::Zero(d);
  for (const auto& s : samples) sq += (s.features - out.mean).cwiseAbs2();
  out.scale = VectorXd::Ones(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(sq[j] / n);
    if (sd > 1e-12) out.scale[j] = sd;
  }
  return out;
}

Standardizer Standardizer::identity(Eigen::Index width) {
  return {VectorXd::Zero(width), VectorXd::Ones(width)};
}

VectorXd Standardizer::apply(const VectorXd& features) const {
  if (features.size() != width())
    throw ArgumentError("feature width " + std::to_string(features.size()) +
                        " does not match standardizer width " + std::to_string(width()));
  return (features - mean).cwiseQuotient(scale);
}

void Standardizer::apply_in_place(std::vector<Sample>& samples) const {
  for (auto& s : samples) s.features = apply(s.features);
}

}  // namespace salgp
