#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "salgp/kernels.hpp"
#include "salgp/optim.hpp"

namespace salgp {

/// Diagonal jitter ladder tried, in order, before a factorization is
/// declared failed.
inline constexpr std::array<double, 3> kJitterLadder{1e-6, 1e-5, 1e-4};

struct FitOptions {
  int iters{2000};
  double learning_rate{5e-3};
  std::uint64_t seed{0};
  double min_lengthscale{0};  // lower bound on every lengthscale, 0 = none
};

enum class PredictionKind { local, global };

template <typename Scalar>
struct PosteriorPrediction {
  Scalar mean{0};
  Scalar variance{0};
  PredictionKind kind{PredictionKind::local};
  bool clamped{false};  // the raw variance was negative and set to 0
};

template <typename Scalar>
struct LikelihoodResult {
  Scalar value{0};
  Vector<Scalar> gradient;  // d/dtheta in pack_parameters order
  Scalar jitter{0};
};

namespace detail {

template <typename Scalar>
struct Factor {
  Eigen::LLT<Matrix<Scalar>> llt;
  Scalar jitter{0};
};

/// Cholesky of K + (noise + jitter) I, escalating jitter along the ladder.
template <typename Scalar>
Factor<Scalar> factorize(const Matrix<Scalar>& k, Scalar noise) {
  for (double j : kJitterLadder) {
    Matrix<Scalar> a = k;
    a.diagonal().array() += noise + Scalar(j);
    Factor<Scalar> f{Eigen::LLT<Matrix<Scalar>>(a), Scalar(j)};
    if (f.llt.info() != Eigen::Success) continue;
    const auto d = f.llt.matrixLLT().diagonal();
    if (!d.allFinite() || (d.array() <= Scalar(0)).any()) continue;
    return f;
  }
  throw NumericalError("Cholesky factorization failed after jitter escalation to " +
                       std::to_string(kJitterLadder.back()));
}

template <typename Scalar>
Vector<Scalar> targets(std::span<const CalibrationSample<Scalar>> samples) {
  Vector<Scalar> y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y[static_cast<Eigen::Index>(i)] = samples[i].residual;
  return y;
}

template <typename Scalar>
LikelihoodResult<Scalar> lml(const PairGeometry<Scalar>& g, const Vector<Scalar>& y,
                             const KernelSpec& spec, const HyperParams<Scalar>& hp,
                             bool with_gradient) {
  const PreparedKernel<Scalar> kernel(spec, hp);
  const Matrix<Scalar> k = kernel_matrix(g, kernel);
  const auto f = factorize(k, hp.noise);
  const Vector<Scalar> alpha = f.llt.solve(y);
  const auto n = static_cast<Scalar>(y.size());

  LikelihoodResult<Scalar> out;
  out.jitter = f.jitter;
  const Scalar log_det = Scalar(2) * f.llt.matrixLLT().diagonal().array().log().sum();
  out.value = Scalar(-0.5) * y.dot(alpha) - Scalar(0.5) * log_det -
              Scalar(0.5) * n * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  if (!with_gradient) return out;

  // dL/dtheta = 1/2 tr((a a^T - K^-1) dK/dtheta)
  Matrix<Scalar> w = -f.llt.solve(Matrix<Scalar>::Identity(y.size(), y.size()));
  w.noalias() += alpha * alpha.transpose();
  const auto& layout = kernel.layout();
  out.gradient.resize(layout.total());
  out.gradient.head(layout.kernel_count) = Scalar(0.5) * contract_kernel_gradient(g, kernel, w);
  out.gradient[layout.noise] = Scalar(0.5) * w.trace() * hp.noise;
  return out;
}

}  // namespace detail

/// Fitted exact GP: training data, hyperparameters and the Cholesky factor
/// of K + (noise + jitter) I together with the dual weights.
template <typename Scalar>
struct GPModel {
  std::vector<CalibrationSample<Scalar>> samples;
  KernelSpec spec;
  HyperParams<Scalar> hp;
  Scalar jitter{0};
  Matrix<Scalar> chol;  // lower triangular
  Vector<Scalar> dual;
  std::vector<Scalar> training_log;  // best-so-far log marginal likelihood

  Eigen::Index size() const { return static_cast<Eigen::Index>(samples.size()); }
  Eigen::Index width() const { return samples.empty() ? 0 : samples.front().features.size(); }

  /// Factorizes the training kernel for fixed hyperparameters.
  static GPModel condition(std::vector<CalibrationSample<Scalar>> samples, const KernelSpec& spec,
                           const HyperParams<Scalar>& hp) {
    if (samples.empty()) throw ArgumentError("GP needs at least one training sample");
    GPModel m;
    m.samples = std::move(samples);
    m.spec = spec;
    m.hp = hp;
    const std::span<const CalibrationSample<Scalar>> view(m.samples);
    const auto f = detail::factorize(kernel_matrix(view, spec, hp), hp.noise);
    m.jitter = f.jitter;
    m.chol = f.llt.matrixL();
    m.dual = f.llt.solve(detail::targets(view));
    return m;
  }

  bool trained_on_layer(int layer_index) const {
    for (const auto& s : samples)
      if (s.layer_index == layer_index) return true;
    return false;
  }
};

/// Log marginal likelihood of the residual targets and its gradient with
/// respect to the packed log-space parameters.
template <typename Scalar>
LikelihoodResult<Scalar> log_marginal_likelihood(std::span<const CalibrationSample<Scalar>> samples,
                                                 const KernelSpec& spec,
                                                 const HyperParams<Scalar>& hp,
                                                 bool with_gradient = true) {
  if (samples.empty()) throw ArgumentError("log marginal likelihood needs n >= 1");
  return detail::lml(PairGeometry<Scalar>::build(samples, spec), detail::targets(samples), spec,
                     hp, with_gradient);
}

/// Maximizes the log marginal likelihood with Adam on the log-space
/// parameters. Evaluates init and every iterate; the best evaluated
/// parameters are kept, so the result never scores below the start.
template <typename Scalar>
GPModel<Scalar> fit(std::vector<CalibrationSample<Scalar>> samples, const KernelSpec& spec,
                    const HyperParams<Scalar>& init, const FitOptions& opt) {
  if (samples.size() < 2) throw ArgumentError("fit needs at least two samples");
  if (opt.iters < 0 || !(opt.learning_rate > 0))
    throw ArgumentError("iters must be >= 0 and learning_rate > 0");
  const std::span<const CalibrationSample<Scalar>> view(samples);
  const auto geometry = PairGeometry<Scalar>::build(view, spec);
  const auto y = detail::targets(view);

  Vector<Scalar> theta = pack_parameters(spec, init);
  Vector<Scalar> best_theta = theta;
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> log;
  log.reserve(static_cast<std::size_t>(opt.iters) + 1);

  typename AdamStepper<Scalar>::Options adam_opt;
  adam_opt.learning_rate = Scalar(opt.learning_rate);
  AdamStepper<Scalar> adam(theta.size(), adam_opt);

  Vector<Scalar> lower = Vector<Scalar>::Constant(theta.size(), Scalar(-15));
  if (opt.min_lengthscale > 0) {
    const auto lay = ParameterLayout::of(spec);
    const Scalar floor = std::log(Scalar(opt.min_lengthscale));
    for (int at : {lay.base, lay.layer})
      if (at >= 0) lower[at + 1] = lower[at + 3] = floor;
    theta = theta.cwiseMax(lower);
  }

  for (int it = 0; it <= opt.iters; ++it) {
    LikelihoodResult<Scalar> r;
    try {
      r = detail::lml(geometry, y, spec, unpack_parameters(spec, theta), it < opt.iters);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(r.value) || (it < opt.iters && !r.gradient.allFinite()))
      throw NumericalError("non-finite log marginal likelihood at iteration " + std::to_string(it));
    if (r.value > best) {
      best = r.value;
      best_theta = theta;
    }
    log.push_back(best);
    if (it == opt.iters) break;
    theta += adam.direction(r.gradient);
    theta = theta.cwiseMax(lower).cwiseMin(Scalar(15));
  }

  const auto hp = opt.iters == 0 ? init : unpack_parameters(spec, best_theta);
  auto model = GPModel<Scalar>::condition(std::move(samples), spec, hp);
  model.training_log = std::move(log);
  return model;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> cross_matrix(const GPModel<Scalar>& model,
                            std::span<const CalibrationSample<Scalar>> queries,
                            const PreparedKernel<Scalar>& k) {
  const bool layered = model.spec.variant != KernelVariant::single_sum;
  Matrix<Scalar> out(model.size(), static_cast<Eigen::Index>(queries.size()));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& x = queries[q];
    if (x.features.size() != model.width())
      throw ArgumentError("query width " + std::to_string(x.features.size()) +
                          " does not match training width " + std::to_string(model.width()));
    const int sq = layered ? model.spec.slot_of(x.layer_index) : 0;
    for (Eigen::Index i = 0; i < model.size(); ++i) {
      const auto& t = model.samples[static_cast<std::size_t>(i)];
      const Scalar dc = x.confidence - t.confidence;
      out(i, static_cast<Eigen::Index>(q)) =
          k((x.features - t.features).squaredNorm(), dc * dc, sq,
            layered ? model.spec.slot_of(t.layer_index) : 0);
    }
  }
  return out;
}

template <typename Scalar>
void require_global_variant(const GPModel<Scalar>& model) {
  const auto v = model.spec.variant;
  if (v != KernelVariant::hierarchical_layer && v != KernelVariant::multilayer_additive)
    throw ArgumentError("global prediction requires the hierarchical_layer or "
                        "multilayer_additive variant, model is " + to_string(v));
}

template <typename Scalar>
CalibrationSample<Scalar> global_query(const Vector<Scalar>& features, Scalar confidence) {
  CalibrationSample<Scalar> q;
  q.features = features;
  q.confidence = confidence;
  q.layer_index = kGlobalLayer;
  return q;
}

template <typename Scalar>
PosteriorPrediction<Scalar> finish(Scalar mean, Scalar variance, PredictionKind kind) {
  PosteriorPrediction<Scalar> p{mean, variance, kind, false};
  if (p.variance < Scalar(0)) {
    p.variance = Scalar(0);
    p.clamped = true;
  }
  return p;
}

}  // namespace detail

/// Covariance between `query` and every training sample. A query with
/// layer index kGlobalLayer gets the layer-agnostic part only.
template <typename Scalar>
Vector<Scalar> cross_covariance(const GPModel<Scalar>& model, const CalibrationSample<Scalar>& query) {
  const PreparedKernel<Scalar> k(model.spec, model.hp);
  return detail::cross_matrix(model, std::span<const CalibrationSample<Scalar>>(&query, 1), k).col(0);
}

/// Posterior of many queries at their own layer indices. Variances exclude
/// observation noise and are clamped at 0.
template <typename Scalar>
std::vector<PosteriorPrediction<Scalar>> predict_local_batch(
    const GPModel<Scalar>& model, std::span<const CalibrationSample<Scalar>> queries) {
  if (model.spec.variant != KernelVariant::single_sum)
    for (const auto& q : queries)
      if (!model.trained_on_layer(q.layer_index))
        throw ArgumentError("layer " + std::to_string(q.layer_index) +
                            " is not present in the training set");
  const PreparedKernel<Scalar> k(model.spec, model.hp);
  const Matrix<Scalar> ks = detail::cross_matrix(model, queries, k);
  const Vector<Scalar> means = ks.transpose() * model.dual;
  const Matrix<Scalar> v = model.chol.template triangularView<Eigen::Lower>().solve(ks);
  const Vector<Scalar> reduce = v.colwise().squaredNorm().transpose();

  std::vector<PosteriorPrediction<Scalar>> out;
  out.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const int slot = model.spec.variant == KernelVariant::single_sum
                         ? 0
                         : model.spec.slot_of(queries[q].layer_index);
    const Scalar prior = k(Scalar(0), Scalar(0), slot, slot);
    const auto i = static_cast<Eigen::Index>(q);
    out.push_back(detail::finish(means[i], prior - reduce[i], PredictionKind::local));
  }
  return out;
}

template <typename Scalar>
PosteriorPrediction<Scalar> predict_local(const GPModel<Scalar>& model,
                                          const CalibrationSample<Scalar>& query) {
  return predict_local_batch(model, std::span<const CalibrationSample<Scalar>>(&query, 1)).front();
}

/// Layer-agnostic posterior at layer index -1: the cross-covariance keeps
/// only the shared component (k_global for HL, alpha * base for ML) and
/// the variance is the pure-global one, k_g(x,x) - k_g^T (K + s I)^-1 k_g.
template <typename Scalar>
PosteriorPrediction<Scalar> predict_global(const GPModel<Scalar>& model,
                                           const Vector<Scalar>& features, Scalar confidence) {
  detail::require_global_variant(model);
  const auto q = detail::global_query(features, confidence);
  const PreparedKernel<Scalar> k(model.spec, model.hp);
  const Vector<Scalar> ks =
      detail::cross_matrix(model, std::span<const CalibrationSample<Scalar>>(&q, 1), k).col(0);
  const Vector<Scalar> v = model.chol.template triangularView<Eigen::Lower>().solve(ks);
  const Scalar prior = k(Scalar(0), Scalar(0), -1, -1);
  return detail::finish(Scalar(ks.dot(model.dual)), prior - v.squaredNorm(), PredictionKind::global);
}

/// Global posterior of the average latent value over several inputs that
/// describe one record (e.g. its per-layer feature vectors). Mean is the
/// average of the per-input global means; variance is 1^T C 1 / m^2 with C
/// the joint pure-global posterior covariance of the inputs.
template <typename Scalar>
PosteriorPrediction<Scalar> predict_global_joint(const GPModel<Scalar>& model,
                                                 std::span<const Vector<Scalar>> features,
                                                 Scalar confidence) {
  detail::require_global_variant(model);
  if (features.empty()) throw ArgumentError("global prediction needs at least one input");
  std::vector<CalibrationSample<Scalar>> qs;
  qs.reserve(features.size());
  for (const auto& f : features) qs.push_back(detail::global_query(f, confidence));
  const PreparedKernel<Scalar> k(model.spec, model.hp);
  const std::span<const CalibrationSample<Scalar>> view(qs);
  const Matrix<Scalar> ks = detail::cross_matrix(model, view, k);
  const Matrix<Scalar> v = model.chol.template triangularView<Eigen::Lower>().solve(ks);
  const auto m = static_cast<Eigen::Index>(qs.size());

  Scalar prior_sum = 0;
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const Scalar dc = qs[static_cast<std::size_t>(a)].confidence - qs[static_cast<std::size_t>(b)].confidence;
      prior_sum += k((qs[static_cast<std::size_t>(a)].features - qs[static_cast<std::size_t>(b)].features).squaredNorm(),
                     dc * dc, -1, -1);
    }
  const Vector<Scalar> vsum = v.rowwise().sum();
  const Scalar mean = (ks.transpose() * model.dual).sum() / Scalar(m);
  const Scalar var = (prior_sum - vsum.squaredNorm()) / Scalar(m * m);
  return detail::finish(mean, var, PredictionKind::global);
}

}  // namespace salgp
