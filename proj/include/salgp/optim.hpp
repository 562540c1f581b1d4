#pragma once

#include <cmath>

#include "salgp/types.hpp"

namespace salgp {

/// First-order update with bias-corrected first/second moment tracking
/// (Adam). Works on any dense vector of unconstrained parameters.
template <typename Scalar>
class AdamStepper {
 public:
  struct Options {
    Scalar learning_rate{Scalar(5e-3)};
    Scalar beta1{Scalar(0.9)};
    Scalar beta2{Scalar(0.999)};
    Scalar epsilon{Scalar(1e-8)};
  };

  AdamStepper(Eigen::Index size, Options options)
      : opt_(options), m_(Vector<Scalar>::Zero(size)), v_(Vector<Scalar>::Zero(size)) {}

  /// Direction to *add* to the parameters for ascent on `grad`.
  Vector<Scalar> direction(const Vector<Scalar>& grad) {
    ++t_;
    m_ = opt_.beta1 * m_ + (Scalar(1) - opt_.beta1) * grad;
    v_ = opt_.beta2 * v_ + (Scalar(1) - opt_.beta2) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(opt_.beta1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(opt_.beta2, Scalar(t_));
    return opt_.learning_rate * (m_ / c1).cwiseQuotient(((v_ / c2).cwiseSqrt().array() + opt_.epsilon).matrix());
  }

  int steps() const { return t_; }

 private:
  Options opt_;
  Vector<Scalar> m_;
  Vector<Scalar> v_;
  int t_{0};
};

/// Sign-based step with per-coordinate step sizes that grow while the
/// gradient sign is stable and shrink when it flips (Rprop). Insensitive
/// to gradient magnitude, which matters on nearly flat objectives.
template <typename Scalar>
class SignAdaptiveStepper {
 public:
  struct Options {
    Scalar initial_step{Scalar(0.05)};
    Scalar grow{Scalar(1.2)};
    Scalar shrink{Scalar(0.5)};
    Scalar min_step{Scalar(1e-8)};
    Scalar max_step{Scalar(1)};
  };

  SignAdaptiveStepper(Eigen::Index size, Options options)
      : opt_(options),
        step_(Vector<Scalar>::Constant(size, options.initial_step)),
        last_(Vector<Scalar>::Zero(size)) {}

  /// Direction to add to the parameters for descent on `grad`.
  Vector<Scalar> direction(const Vector<Scalar>& grad) {
    Vector<Scalar> out(grad.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      const Scalar s = sign(grad[i]);
      const Scalar prod = s * last_[i];
      if (prod > 0) step_[i] = std::min(step_[i] * opt_.grow, opt_.max_step);
      else if (prod < 0) step_[i] = std::max(step_[i] * opt_.shrink, opt_.min_step);
      out[i] = -s * step_[i];
      last_[i] = s;
    }
    return out;
  }

 private:
  static Scalar sign(Scalar x) { return x > 0 ? Scalar(1) : (x < 0 ? Scalar(-1) : Scalar(0)); }

  Options opt_;
  Vector<Scalar> step_;
  Vector<Scalar> last_;
};

}  // namespace salgp
