#include "salgp/baselines.hpp"

#include <cmath>
#include <limits>

#include "salgp/ingest.hpp"
#include "salgp/optim.hpp"

namespace salgp {

namespace {

void check(const MatrixXd& logits, std::span<const int> labels) {
  if (logits.rows() == 0 || static_cast<std::size_t>(logits.rows()) != labels.size())
    throw ArgumentError("logits and labels disagree in length");
  if (!logits.allFinite()) throw ArgumentError("non-finite logits");
  for (int y : labels)
    if (y < 0 || y >= logits.cols()) throw ArgumentError("label out of range");
}

// Loss and dL/dT in extended precision. On an all-correct, high-margin set
// both shrink like exp(-margin / T) and leave the double range long before
// T reaches the floor; the optimizer still needs their sign.
struct ExtendedLoss {
  long double loss{0};
  long double gradient{0};
};

ExtendedLoss extended_loss(const MatrixXd& logits, std::span<const int> labels, double temperature,
                           bool with_gradient) {
  check(logits, labels);
  if (!(temperature > 0)) throw ArgumentError("temperature must be positive");
  const long double t = temperature;
  ExtendedLoss out;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    Eigen::Index top = 0;
    const long double m = row.maxCoeff(&top);
    const long double zy = row(labels[static_cast<std::size_t>(i)]);
    long double rest = 0, weighted = 0;  // sum over non-max classes; sum of e_j (z_y - z_j)
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      const long double e = j == top ? 1.0L : std::exp((static_cast<long double>(row(j)) - m) / t);
      if (j != top) rest += e;
      weighted += e * (zy - static_cast<long double>(row(j)));
    }
    out.loss += (m - zy) / t + std::log1p(rest);
    if (with_gradient) out.gradient += weighted / (1.0L + rest);
  }
  const auto n = static_cast<long double>(logits.rows());
  out.loss /= n;
  out.gradient /= n * t * t;
  return out;
}

}  // namespace

double temperature_loss(const MatrixXd& logits, std::span<const int> labels, double temperature) {
  return static_cast<double>(extended_loss(logits, labels, temperature, false).loss);
}

double temperature_gradient(const MatrixXd& logits, std::span<const int> labels,
                            double temperature) {
  return static_cast<double>(extended_loss(logits, labels, temperature, true).gradient);
}

TemperatureModel fit_temperature(const MatrixXd& logits, std::span<const int> labels,
                                 const TemperatureOptions& options) {
  check(logits, labels);
  if (!(options.floor > 0 && options.floor <= options.init_temperature &&
        options.init_temperature <= options.ceiling))
    throw ArgumentError("need 0 < floor <= init_temperature <= ceiling");
  if (options.iters < 0 || !(options.learning_rate > 0))
    throw ArgumentError("iters must be >= 0 and learning_rate > 0");

  const double lo = std::log(options.floor), hi = std::log(options.ceiling);
  typename SignAdaptiveStepper<double>::Options step_opt;
  step_opt.initial_step = options.learning_rate;
  SignAdaptiveStepper<double> stepper(1, step_opt);

  TemperatureModel model;
  double log_t = std::log(options.init_temperature);
  long double best = std::numeric_limits<long double>::infinity();
  for (int it = 0; it <= options.iters; ++it) {
    const double t =
        log_t <= lo ? options.floor : (log_t >= hi ? options.ceiling : std::exp(log_t));
    const auto r = extended_loss(logits, labels, t, it < options.iters);
    model.trace.push_back({t, static_cast<double>(r.loss)});
    if (r.loss < best) {
      best = r.loss;
      model.temperature = t;
    }
    if (it == options.iters) break;
    // only the sign reaches the stepper, so the scale of the log-T chain rule is irrelevant
    VectorXd g(1);
    g[0] = r.gradient > 0 ? 1.0 : (r.gradient < 0 ? -1.0 : 0.0);
    log_t = std::clamp(log_t + stepper.direction(g)[0], lo, hi);
  }
  return model;
}

MatrixXd apply_temperature(const MatrixXd& logits, double temperature) {
  if (!(temperature > 0)) throw ArgumentError("temperature must be positive");
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::ArrayXd z = logits.row(i).transpose().array() / temperature;
    const Eigen::ArrayXd e = (z - z.maxCoeff()).exp();
    out.row(i) = (e / e.sum()).matrix().transpose();
  }
  return out;
}

MatrixXd dump_logits(const FeatureDump& dump, bool* recovered) {
  if (recovered) *recovered = !dump.logits.has_value();
  if (dump.logits) return *dump.logits;
  return dump.softmax.array().max(1e-30).log().matrix();
}

}  // namespace salgp
