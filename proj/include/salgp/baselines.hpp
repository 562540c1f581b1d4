#pragma once

#include <span>
#include <vector>

#include "salgp/types.hpp"

namespace salgp {

struct FeatureDump;

inline constexpr double kTemperatureFloor = 0.01;
inline constexpr double kTemperatureCeiling = 100.0;

struct TemperatureStep {
  double temperature;
  double nll;
};

struct TemperatureModel {
  double temperature{1.0};
  std::vector<TemperatureStep> trace;
};

struct TemperatureOptions {
  double init_temperature{1.0};
  int iters{200};
  double learning_rate{0.05};  // initial step on log T
  double floor{kTemperatureFloor};
  double ceiling{kTemperatureCeiling};
};

/// mean_i [ -z_{i,y}/T + log sum_j exp(z_ij / T) ]
double temperature_loss(const MatrixXd& logits, std::span<const int> labels, double temperature);

/// mean_i (1/T^2) [ z_{i,y} - E_{p(T)}[z_i] ]
double temperature_gradient(const MatrixXd& logits, std::span<const int> labels,
                            double temperature);

/// Minimizes temperature_loss over log T with sign-adaptive gradient
/// steps, T kept inside [floor, ceiling]. Returns the best temperature
/// seen, so the final loss never exceeds the initial one.
TemperatureModel fit_temperature(const MatrixXd& logits, std::span<const int> labels,
                                 const TemperatureOptions& options = {});

/// Row-wise softmax of logits / T.
MatrixXd apply_temperature(const MatrixXd& logits, double temperature);

/// The dump's logits, or log(softmax) when the exporter did not keep them.
/// `recovered` is set when the fallback was used.
MatrixXd dump_logits(const FeatureDump& dump, bool* recovered = nullptr);

}  // namespace salgp
