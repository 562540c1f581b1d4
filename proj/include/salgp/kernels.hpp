#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "salgp/types.hpp"

namespace salgp {

enum class BaseKind { rbf, matern52 };

enum class KernelVariant { single_sum, hierarchical_layer, icm_full, multilayer_additive };

BaseKind parse_base_kind(const std::string& name);
std::string to_string(BaseKind kind);
KernelVariant parse_variant(const std::string& name);
std::string to_string(KernelVariant variant);

/// Kernel composition. `layers` lists the layer indices the multi-layer
/// variants know about; position p in the list is slot p of the
/// coregionalization structure.
struct KernelSpec {
  BaseKind base{BaseKind::matern52};
  KernelVariant variant{KernelVariant::single_sum};
  std::vector<int> layers{1};
  int icm_rank{1};

  int layer_count() const { return static_cast<int>(layers.size()); }

  /// 0-based slot of `layer_index`, or -1 for kGlobalLayer. Throws for any
  /// other index not in `layers`.
  int slot_of(int layer_index) const {
    if (layer_index == kGlobalLayer) return -1;
    for (std::size_t p = 0; p < layers.size(); ++p)
      if (layers[p] == layer_index) return static_cast<int>(p);
    throw ArgumentError("layer index " + std::to_string(layer_index) + " out of range");
  }

  void validate() const {
    if (layers.empty()) throw ArgumentError("kernel spec needs at least one layer");
    if (variant == KernelVariant::icm_full && (icm_rank < 1 || icm_rank > layer_count()))
      throw ArgumentError("icm_rank must lie in [1, layer_count]");
  }
};

/// Variance/lengthscale pairs of the feature and confidence parts of the
/// sum kernel  sf^2 k_feat(z,z') + sc^2 k_conf(s,s').
template <typename Scalar>
struct SumKernelParams {
  Scalar feat_variance{1};
  Scalar feat_lengthscale{1};
  Scalar conf_variance{1};
  Scalar conf_lengthscale{1};
};

/// Kernel hyperparameters in natural (positive) units. Which fields are
/// live depends on the variant:
///   single_sum           base
///   hierarchical_layer   base (k_global), layer (k_layer)
///   multilayer_additive  base, global_weight, layer_variances
///   icm_full             base, icm_factor, icm_diag
/// `noise` is the observation noise variance of the GP likelihood.
template <typename Scalar>
struct HyperParams {
  SumKernelParams<Scalar> base;
  SumKernelParams<Scalar> layer;
  Scalar global_weight{1};
  Vector<Scalar> layer_variances;
  Matrix<Scalar> icm_factor;
  Vector<Scalar> icm_diag;
  Scalar noise{Scalar(0.1)};

  /// B = factor * factor^T + diag(icm_diag).
  Matrix<Scalar> icm_B() const {
    Matrix<Scalar> b = icm_factor * icm_factor.transpose();
    b.diagonal() += icm_diag;
    return b;
  }
};

/// Unit-variance initial values: lengthscales 1, noise 0.1, alpha = 1,
/// beta = 1 and B = 11^T + I.
template <typename Scalar>
HyperParams<Scalar> default_hyperparams(const KernelSpec& spec) {
  spec.validate();
  HyperParams<Scalar> hp;
  const int l = spec.layer_count();
  hp.layer_variances = Vector<Scalar>::Ones(l);
  const int rank = std::clamp(spec.icm_rank, 1, l);
  hp.icm_factor = Matrix<Scalar>::Constant(l, rank, Scalar(1) / std::sqrt(Scalar(rank)));
  hp.icm_diag = Vector<Scalar>::Ones(l);
  return hp;
}

namespace detail {

inline constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;

/// Unit-variance correlation and its derivative with respect to
/// log(lengthscale), as functions of the squared distance.
template <typename Scalar>
struct Correlation {
  Scalar value;
  Scalar dlog_lengthscale;
};

template <typename Scalar>
Correlation<Scalar> correlation(BaseKind kind, Scalar sq_dist, Scalar lengthscale) {
  using std::exp;
  using std::sqrt;
  if (kind == BaseKind::rbf) {
    const Scalar q = sq_dist / (lengthscale * lengthscale);
    const Scalar v = exp(Scalar(-0.5) * q);
    return {v, v * q};
  }
  const Scalar a = Scalar(kSqrt5) * sqrt(sq_dist) / lengthscale;
  const Scalar e = exp(-a);
  const Scalar v = (Scalar(1) + a + a * a / Scalar(3)) * e;
  return {v, a * a * (Scalar(1) + a) / Scalar(3) * e};
}

template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::exp;
  using std::log1p;
  return x > Scalar(30) ? x : log1p(exp(x));
}

template <typename Scalar>
Scalar inverse_softplus(Scalar y) {
  using std::expm1;
  using std::log;
  return y > Scalar(30) ? y : log(expm1(y));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  return Scalar(1) / (Scalar(1) + exp(-x));
}

}  // namespace detail

/// Positions of each trainable parameter in the packed log-space vector.
/// Kernel parameters come first; the log noise is always the last entry.
struct ParameterLayout {
  int base{0};        // 4 entries: log sf^2, log lf, log sc^2, log lc
  int layer{-1};      // 4 entries (hierarchical_layer)
  int alpha{-1};      // 1 entry (multilayer_additive)
  int beta{-1};       // L entries (multilayer_additive)
  int icm_factor{-1}; // L*rank entries, column-major, unconstrained
  int icm_diag{-1};   // L entries, inverse-softplus of the diagonal
  int kernel_count{0};
  int noise{0};

  int total() const { return kernel_count + 1; }

  static ParameterLayout of(const KernelSpec& spec) {
    spec.validate();
    ParameterLayout p;
    int next = 4;
    const int l = spec.layer_count();
    switch (spec.variant) {
      case KernelVariant::single_sum:
        break;
      case KernelVariant::hierarchical_layer:
        p.layer = next;
        next += 4;
        break;
      case KernelVariant::multilayer_additive:
        p.alpha = next++;
        p.beta = next;
        next += l;
        break;
      case KernelVariant::icm_full:
        p.icm_factor = next;
        next += l * spec.icm_rank;
        p.icm_diag = next;
        next += l;
        break;
    }
    p.kernel_count = next;
    p.noise = next;
    return p;
  }
};

std::vector<std::string> parameter_names(const KernelSpec& spec);

template <typename Scalar>
Vector<Scalar> pack_parameters(const KernelSpec& spec, const HyperParams<Scalar>& hp) {
  using std::log;
  const auto lay = ParameterLayout::of(spec);
  const int l = spec.layer_count();
  Vector<Scalar> theta(lay.total());
  auto put_log = [&](int at, Scalar v, const char* what) {
    if (!(v > Scalar(0)))
      throw ArgumentError(std::string("parameter '") + what + "' must be strictly positive");
    theta[at] = log(v);
  };
  auto put_sum = [&](int at, const SumKernelParams<Scalar>& p) {
    put_log(at, p.feat_variance, "feat_variance");
    put_log(at + 1, p.feat_lengthscale, "feat_lengthscale");
    put_log(at + 2, p.conf_variance, "conf_variance");
    put_log(at + 3, p.conf_lengthscale, "conf_lengthscale");
  };
  put_sum(lay.base, hp.base);
  if (lay.layer >= 0) put_sum(lay.layer, hp.layer);
  if (lay.alpha >= 0) {
    put_log(lay.alpha, hp.global_weight, "global_weight");
    if (hp.layer_variances.size() != l) throw ArgumentError("layer_variances has wrong length");
    for (int i = 0; i < l; ++i) put_log(lay.beta + i, hp.layer_variances[i], "layer_variance");
  }
  if (lay.icm_factor >= 0) {
    if (hp.icm_factor.rows() != l || hp.icm_factor.cols() != spec.icm_rank ||
        hp.icm_diag.size() != l)
      throw ArgumentError("icm parameters have wrong shape");
    for (int c = 0; c < spec.icm_rank; ++c)
      for (int r = 0; r < l; ++r) theta[lay.icm_factor + r + c * l] = hp.icm_factor(r, c);
    for (int i = 0; i < l; ++i) {
      if (!(hp.icm_diag[i] > Scalar(0)))
        throw ArgumentError("icm diagonal must be strictly positive");
      theta[lay.icm_diag + i] = detail::inverse_softplus(hp.icm_diag[i]);
    }
  }
  put_log(lay.noise, hp.noise, "noise");
  return theta;
}

template <typename Scalar>
HyperParams<Scalar> unpack_parameters(const KernelSpec& spec, const Vector<Scalar>& theta) {
  using std::exp;
  const auto lay = ParameterLayout::of(spec);
  if (theta.size() != lay.total()) throw ArgumentError("parameter vector has wrong length");
  const int l = spec.layer_count();
  auto hp = default_hyperparams<Scalar>(spec);
  auto get_sum = [&](int at) {
    return SumKernelParams<Scalar>{exp(theta[at]), exp(theta[at + 1]), exp(theta[at + 2]),
                                   exp(theta[at + 3])};
  };
  hp.base = get_sum(lay.base);
  if (lay.layer >= 0) hp.layer = get_sum(lay.layer);
  if (lay.alpha >= 0) {
    hp.global_weight = exp(theta[lay.alpha]);
    for (int i = 0; i < l; ++i) hp.layer_variances[i] = exp(theta[lay.beta + i]);
  }
  if (lay.icm_factor >= 0) {
    for (int c = 0; c < spec.icm_rank; ++c)
      for (int r = 0; r < l; ++r) hp.icm_factor(r, c) = theta[lay.icm_factor + r + c * l];
    for (int i = 0; i < l; ++i) hp.icm_diag[i] = detail::softplus(theta[lay.icm_diag + i]);
  }
  hp.noise = exp(theta[lay.noise]);
  return hp;
}

/// Spec and hyperparameters bundled with the quantities every pair
/// evaluation needs (B, its diagonal derivative, the layout).
template <typename Scalar>
class PreparedKernel {
 public:
  PreparedKernel(const KernelSpec& spec, const HyperParams<Scalar>& hp)
      : spec_(spec), hp_(hp), layout_(ParameterLayout::of(spec)) {
    const int l = spec.layer_count();
    if (spec.variant == KernelVariant::multilayer_additive && hp.layer_variances.size() != l)
      throw ArgumentError("layer_variances has wrong length");
    if (spec.variant == KernelVariant::icm_full) {
      if (hp.icm_factor.rows() != l || hp.icm_diag.size() != l)
        throw ArgumentError("icm parameters have wrong shape");
      b_ = hp.icm_B();
      ddiag_.resize(l);
      for (int i = 0; i < l; ++i) {
        // d softplus(raw) / d raw expressed through the stored value d:
        // sigmoid(raw) = 1 - exp(-d)
        ddiag_[i] = -std::expm1(-hp.icm_diag[i]);
      }
    }
  }

  const KernelSpec& spec() const { return spec_; }
  const HyperParams<Scalar>& hyperparams() const { return hp_; }
  const ParameterLayout& layout() const { return layout_; }

  /// Kernel value for a pair described by its squared feature distance,
  /// squared confidence distance and layer slots (-1 = global). When
  /// `grad` is non-null, adds weight * dk/dtheta for every kernel
  /// parameter (log-space) into it.
  Scalar operator()(Scalar feat_sq, Scalar conf_sq, int slot_a, int slot_b,
                    Scalar* grad = nullptr, Scalar weight = Scalar(1)) const {
    const bool same = slot_a == slot_b && slot_a >= 0;
    switch (spec_.variant) {
      case KernelVariant::single_sum:
        return sum_kernel(hp_.base, feat_sq, conf_sq, grad ? grad + layout_.base : nullptr,
                          weight);
      case KernelVariant::hierarchical_layer: {
        Scalar v = sum_kernel(hp_.base, feat_sq, conf_sq, grad ? grad + layout_.base : nullptr,
                              weight);
        if (same)
          v += sum_kernel(hp_.layer, feat_sq, conf_sq, grad ? grad + layout_.layer : nullptr,
                          weight);
        return v;
      }
      case KernelVariant::multilayer_additive: {
        const Scalar beta = same ? hp_.layer_variances[slot_a] : Scalar(0);
        const Scalar scale = hp_.global_weight + beta;
        const Scalar base = sum_kernel(hp_.base, feat_sq, conf_sq,
                                       grad ? grad + layout_.base : nullptr, weight * scale);
        if (grad) {
          grad[layout_.alpha] += weight * hp_.global_weight * base;
          if (same) grad[layout_.beta + slot_a] += weight * beta * base;
        }
        return scale * base;
      }
      case KernelVariant::icm_full: {
        if (slot_a < 0 || slot_b < 0)
          throw ArgumentError("icm kernel has no global layer");
        const Scalar coef = b_(slot_a, slot_b);
        const Scalar base = sum_kernel(hp_.base, feat_sq, conf_sq,
                                       grad ? grad + layout_.base : nullptr, weight * coef);
        if (grad) {
          const int l = spec_.layer_count();
          const Scalar wb = weight * base;
          for (int c = 0; c < spec_.icm_rank; ++c) {
            grad[layout_.icm_factor + slot_a + c * l] += wb * hp_.icm_factor(slot_b, c);
            grad[layout_.icm_factor + slot_b + c * l] += wb * hp_.icm_factor(slot_a, c);
          }
          if (slot_a == slot_b) grad[layout_.icm_diag + slot_a] += wb * ddiag_[slot_a];
        }
        return coef * base;
      }
    }
    return Scalar(0);
  }

  /// sf^2 k(z,z') + sc^2 k(s,s') with gradient entries in the 4-slot block
  /// [log sf^2, log lf, log sc^2, log lc].
  Scalar sum_kernel(const SumKernelParams<Scalar>& p, Scalar feat_sq, Scalar conf_sq,
                    Scalar* grad, Scalar weight) const {
    const auto cf = detail::correlation(spec_.base, feat_sq, p.feat_lengthscale);
    const auto cc = detail::correlation(spec_.base, conf_sq, p.conf_lengthscale);
    const Scalar kf = p.feat_variance * cf.value;
    const Scalar kc = p.conf_variance * cc.value;
    if (grad) {
      grad[0] += weight * kf;
      grad[1] += weight * p.feat_variance * cf.dlog_lengthscale;
      grad[2] += weight * kc;
      grad[3] += weight * p.conf_variance * cc.dlog_lengthscale;
    }
    return kf + kc;
  }

 private:
  KernelSpec spec_;
  HyperParams<Scalar> hp_;
  ParameterLayout layout_;
  Matrix<Scalar> b_;
  Vector<Scalar> ddiag_;
};

namespace detail {

template <typename Scalar>
void require_same_width(const CalibrationSample<Scalar>& a, const CalibrationSample<Scalar>& b) {
  if (a.features.size() != b.features.size())
    throw ArgumentError("feature width mismatch: " + std::to_string(a.features.size()) + " vs " +
                        std::to_string(b.features.size()));
}

template <typename Scalar>
Scalar pair_value(const CalibrationSample<Scalar>& a, const CalibrationSample<Scalar>& b,
                  const KernelSpec& spec, const HyperParams<Scalar>& hp, KernelVariant variant) {
  require_same_width(a, b);
  KernelSpec s = spec;
  s.variant = variant;
  PreparedKernel<Scalar> k(s, hp);
  const Scalar dc = a.confidence - b.confidence;
  const bool layered = variant != KernelVariant::single_sum;
  return k((a.features - b.features).squaredNorm(), dc * dc,
           layered ? s.slot_of(a.layer_index) : 0, layered ? s.slot_of(b.layer_index) : 0);
}

}  // namespace detail

/// variance * exp(-|u-v|^2 / (2 l^2)) for RBF, or the closed-form
/// Matern nu=5/2 covariance.
template <typename Scalar>
Scalar base_kernel(const Vector<Scalar>& u, const Vector<Scalar>& v, Scalar variance,
                   Scalar lengthscale, BaseKind kind) {
  if (u.size() != v.size()) throw ArgumentError("dimension mismatch in base_kernel");
  return variance * detail::correlation(kind, (u - v).squaredNorm(), lengthscale).value;
}

/// Feature kernel plus confidence kernel; the layer index is ignored.
template <typename Scalar>
Scalar single_sum_kernel(const CalibrationSample<Scalar>& a, const CalibrationSample<Scalar>& b,
                         const KernelSpec& spec, const HyperParams<Scalar>& hp) {
  return detail::pair_value(a, b, spec, hp, KernelVariant::single_sum);
}

/// k_global(x,x') + [l == l'] k_layer(x,x').
template <typename Scalar>
Scalar hierarchical_layer_kernel(const CalibrationSample<Scalar>& a,
                                 const CalibrationSample<Scalar>& b, const KernelSpec& spec,
                                 const HyperParams<Scalar>& hp) {
  return detail::pair_value(a, b, spec, hp, KernelVariant::hierarchical_layer);
}

/// base(x,x') * B[l,l'].
template <typename Scalar>
Scalar icm_kernel(const CalibrationSample<Scalar>& a, const CalibrationSample<Scalar>& b,
                  const KernelSpec& spec, const HyperParams<Scalar>& hp) {
  return detail::pair_value(a, b, spec, hp, KernelVariant::icm_full);
}

/// (alpha + [l == l'] beta_l) * base(x,x').
template <typename Scalar>
Scalar multilayer_additive_kernel(const CalibrationSample<Scalar>& a,
                                  const CalibrationSample<Scalar>& b, const KernelSpec& spec,
                                  const HyperParams<Scalar>& hp) {
  return detail::pair_value(a, b, spec, hp, KernelVariant::multilayer_additive);
}

/// Dispatches on spec.variant.
template <typename Scalar>
Scalar kernel_value(const CalibrationSample<Scalar>& a, const CalibrationSample<Scalar>& b,
                    const KernelSpec& spec, const HyperParams<Scalar>& hp) {
  return detail::pair_value(a, b, spec, hp, spec.variant);
}

/// Pairwise squared distances and layer slots of a fixed training set.
/// These do not depend on hyperparameters, so the optimizer builds them once.
template <typename Scalar>
struct PairGeometry {
  Matrix<Scalar> feat_sq;
  Matrix<Scalar> conf_sq;
  std::vector<int> slots;

  Eigen::Index size() const { return feat_sq.rows(); }

  static PairGeometry build(std::span<const CalibrationSample<Scalar>> samples,
                            const KernelSpec& spec) {
    if (samples.empty()) throw ArgumentError("empty sample list");
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto width = samples.front().features.size();
    PairGeometry g;
    g.feat_sq.resize(n, n);
    g.conf_sq.resize(n, n);
    g.slots.resize(samples.size());
    const bool layered = spec.variant != KernelVariant::single_sum;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& s = samples[static_cast<std::size_t>(i)];
      if (s.features.size() != width) throw ArgumentError("feature width mismatch");
      g.slots[static_cast<std::size_t>(i)] = layered ? spec.slot_of(s.layer_index) : 0;
    }
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& a = samples[static_cast<std::size_t>(i)];
      g.feat_sq(i, i) = 0;
      g.conf_sq(i, i) = 0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const auto& b = samples[static_cast<std::size_t>(j)];
        const Scalar f = (a.features - b.features).squaredNorm();
        const Scalar c = (a.confidence - b.confidence) * (a.confidence - b.confidence);
        g.feat_sq(i, j) = g.feat_sq(j, i) = f;
        g.conf_sq(i, j) = g.conf_sq(j, i) = c;
      }
    }
    return g;
  }
};

/// Kernel matrix from precomputed geometry. The upper triangle is evaluated
/// and mirrored, so the result is exactly symmetric.
template <typename Scalar>
Matrix<Scalar> kernel_matrix(const PairGeometry<Scalar>& g, const PreparedKernel<Scalar>& k) {
  const auto n = g.size();
  Matrix<Scalar> m(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    const int si = g.slots[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i; j < n; ++j) {
      const Scalar v = k(g.feat_sq(i, j), g.conf_sq(i, j), si, g.slots[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

template <typename Scalar>
Matrix<Scalar> kernel_matrix(std::span<const CalibrationSample<Scalar>> samples,
                             const KernelSpec& spec, const HyperParams<Scalar>& hp) {
  return kernel_matrix(PairGeometry<Scalar>::build(samples, spec), PreparedKernel<Scalar>(spec, hp));
}

/// sum_ij W_ij dK_ij/dtheta_p for every kernel parameter p (log-space),
/// without materializing the per-parameter matrices. W must be symmetric.
template <typename Scalar>
Vector<Scalar> contract_kernel_gradient(const PairGeometry<Scalar>& g,
                                        const PreparedKernel<Scalar>& k,
                                        const Matrix<Scalar>& weights) {
  const auto n = g.size();
  const int p = k.layout().kernel_count;
  // per-row partial sums, reduced in a fixed order afterwards
  Matrix<Scalar> rows = Matrix<Scalar>::Zero(p, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar* acc = rows.col(i).data();
    const int si = g.slots[static_cast<std::size_t>(i)];
    k(g.feat_sq(i, i), g.conf_sq(i, i), si, si, acc, weights(i, i));
    for (Eigen::Index j = i + 1; j < n; ++j)
      k(g.feat_sq(i, j), g.conf_sq(i, j), si, g.slots[static_cast<std::size_t>(j)], acc,
        Scalar(2) * weights(i, j));
  }
  return rows.rowwise().sum();
}

/// One matrix dK/dtheta_p per kernel parameter, in ParameterLayout order.
/// The observation noise is not a kernel parameter (its derivative is
/// noise * I and is handled by the GP).
template <typename Scalar>
std::vector<Matrix<Scalar>> kernel_param_gradients(
    std::span<const CalibrationSample<Scalar>> samples, const KernelSpec& spec,
    const HyperParams<Scalar>& hp) {
  const auto g = PairGeometry<Scalar>::build(samples, spec);
  const PreparedKernel<Scalar> k(spec, hp);
  const auto n = g.size();
  const int p = k.layout().kernel_count;
  std::vector<Matrix<Scalar>> out(static_cast<std::size_t>(p), Matrix<Scalar>::Zero(n, n));
  Vector<Scalar> buf(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      buf.setZero();
      k(g.feat_sq(i, j), g.conf_sq(i, j), g.slots[static_cast<std::size_t>(i)],
        g.slots[static_cast<std::size_t>(j)], buf.data());
      for (int q = 0; q < p; ++q) out[static_cast<std::size_t>(q)](i, j) =
          out[static_cast<std::size_t>(q)](j, i) = buf[q];
    }
  }
  return out;
}

}  // namespace salgp
