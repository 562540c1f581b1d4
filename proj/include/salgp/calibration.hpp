#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "salgp/gp.hpp"
#include "salgp/ingest.hpp"
#include "salgp/metrics.hpp"
#include "salgp/standardizer.hpp"

namespace salgp {

enum class Method { single_gp, sal_ml, sal_hl };

Method parse_method(const std::string& name);
std::string to_string(Method method);
KernelVariant variant_for(Method method);

/// Lengthscale floor used when fitting calibrators. Every record enters a
/// layered model once per layer with the same confidence and target, and an
/// unbounded confidence lengthscale collapses onto those duplicates.
inline constexpr double kMinLengthscale = 0.1;

struct CalibratorConfig {
  Method method{Method::sal_ml};
  std::vector<int> layers{1};  // exactly one for single_gp
  PoolingMode pooling{PoolingMode::avg};
  BaseKind base{BaseKind::matern52};
  FitOptions opt{.min_lengthscale = kMinLengthscale};

  void validate() const;
  KernelSpec kernel_spec() const;
};

/// A trained residual GP together with everything needed to map a new
/// dump onto its input space.
struct Calibrator {
  CalibratorConfig config;
  Standardizer standardizer;
  GPModel<double> gp;
};

/// Unit variances, median-heuristic lengthscales, noise 0.1, alpha = beta = 1.
HyperParams<double> initial_hyperparams(const std::vector<Sample>& samples, const KernelSpec& spec,
                                        std::uint64_t seed);

/// Builds standardized samples from `train` and fits the GP variant
/// implied by `config.method`.
Calibrator train_calibrator(const FeatureDump& train, const CalibratorConfig& config);

/// Either the layer-agnostic prediction or the local one at a given layer.
struct CalibrationMode {
  bool global{true};
  int layer{0};

  static CalibrationMode parse(const std::string& text);  // "global" | "local:<l>"
  std::string str() const;
};

struct CalibratedConfidence {
  double raw{0};
  double posterior_mean{0};
  double mean{0};            // clamped to [0,1]
  double mean_unclamped{0};  // raw + posterior_mean
  double variance{0};
  int correct{0};
  int layer{0};              // layer of the query, kGlobalLayer for global
};

struct CalibrationResult {
  std::vector<CalibratedConfidence> records;
  std::size_t mean_clamps{0};
  std::size_t variance_clamps{0};
  bool has_variance{true};
};

/// One calibrated confidence per record of `test`.
/// raw + posterior mean, clamped to [0,1]; the unclamped value is kept.
CalibratedConfidence corrected_confidence(double raw, double posterior_mean, double variance);

CalibrationResult calibrate(const Calibrator& calibrator, const FeatureDump& test,
                            CalibrationMode mode);

/// The zero-mean, zero-variance correction: calibrated == raw.
CalibrationResult identity_calibration(const FeatureDump& dump);

/// Metrics over the clamped calibrated means; clamp_count counts mean clamps.
MetricsReport metrics_for(const CalibrationResult& result, int bin_count = kDefaultBins);

/// Metrics of the dump's own top-1 confidences, with multiclass NLL/Brier
/// computed from `probabilities`.
MetricsReport uncalibrated_metrics(const FeatureDump& dump, const MatrixXd& probabilities,
                                   int bin_count = kDefaultBins);

}  // namespace salgp
