#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/LU>

#include "salgp/gp.hpp"

namespace salgp::testing {

inline std::vector<KernelVariant> all_variants() {
  return {KernelVariant::single_sum, KernelVariant::hierarchical_layer, KernelVariant::icm_full,
          KernelVariant::multilayer_additive};
}

inline KernelSpec make_spec(KernelVariant v, BaseKind base, int layers = 3, int rank = 2) {
  KernelSpec s;
  s.base = base;
  s.variant = v;
  s.layers.clear();
  for (int l = 1; l <= layers; ++l) s.layers.push_back(l);
  if (v == KernelVariant::single_sum) s.layers = {1};
  s.icm_rank = v == KernelVariant::icm_full ? std::min(rank, layers) : 1;
  return s;
}

inline Sample random_sample(std::mt19937_64& rng, int width, const KernelSpec& spec) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.2, 1.0);
  Sample s;
  s.features = VectorXd::NullaryExpr(width, [&] { return nd(rng); });
  s.confidence = ud(rng);
  std::uniform_int_distribution<std::size_t> pick(0, spec.layers.size() - 1);
  s.layer_index = spec.layers[pick(rng)];
  s.correctness = std::bernoulli_distribution(0.6)(rng) ? 1 : 0;
  s.residual = s.correctness - s.confidence;
  return s;
}

inline std::vector<Sample> random_samples(std::mt19937_64& rng, int n, int width,
                                          const KernelSpec& spec) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) out.push_back(random_sample(rng, width, spec));
  return out;
}

// Random hyperparameters spread over a few orders of magnitude.
inline HyperParams<double> random_hyperparams(std::mt19937_64& rng, const KernelSpec& spec) {
  std::uniform_real_distribution<double> lu(-1.0, 1.0);
  auto pos = [&] { return std::exp(lu(rng)); };
  auto hp = default_hyperparams<double>(spec);
  for (auto* p : {&hp.base, &hp.layer}) {
    p->feat_variance = pos();
    p->feat_lengthscale = 2.0 * pos();
    p->conf_variance = pos();
    p->conf_lengthscale = 0.3 * pos();
  }
  hp.global_weight = pos();
  for (Eigen::Index i = 0; i < hp.layer_variances.size(); ++i) hp.layer_variances[i] = pos();
  for (Eigen::Index i = 0; i < hp.icm_factor.size(); ++i) hp.icm_factor.data()[i] = lu(rng);
  for (Eigen::Index i = 0; i < hp.icm_diag.size(); ++i) hp.icm_diag[i] = pos();
  hp.noise = 0.1 * pos();
  return hp;
}

// Straight double loop over the pairwise kernel, no shared geometry.
inline MatrixXd loop_kernel(std::span<const Sample> a, std::span<const Sample> b,
                            const KernelSpec& spec, const HyperParams<double>& hp) {
  MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          kernel_value(a[i], b[j], spec, hp);
  return k;
}

inline VectorXd residuals(std::span<const Sample> s) {
  VectorXd y(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) y[static_cast<Eigen::Index>(i)] = s[i].residual;
  return y;
}

struct DenseGP {
  MatrixXd inv;
  double log_det{0};
  VectorXd y;
};

inline DenseGP dense_gp(std::span<const Sample> s, const KernelSpec& spec,
                        const HyperParams<double>& hp, double jitter) {
  MatrixXd k = loop_kernel(s, s, spec, hp);
  k.diagonal().array() += hp.noise + jitter;
  const Eigen::FullPivLU<MatrixXd> lu(k);
  return {lu.inverse(), std::log(lu.determinant()), residuals(s)};
}

inline double dense_lml(const DenseGP& d) {
  const auto n = static_cast<double>(d.y.size());
  return -0.5 * d.y.dot(d.inv * d.y) - 0.5 * d.log_det - 0.5 * n * std::log(2 * std::numbers::pi);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace salgp::testing
