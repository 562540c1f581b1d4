#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salgp/types.hpp"

namespace salgp {

inline constexpr int kDefaultBins = 15;
/// Probabilities are clipped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbEpsilon = 1e-7;

struct ReliabilityBin {
  double lo{0};
  double hi{0};
  std::size_t count{0};
  double mean_confidence{0};
  double accuracy{0};
};

/// Equal-width binning of (confidence, correctness) pairs. Bin m covers
/// ((m-1)/M, m/M]; a confidence of exactly 0 goes to the first bin.
struct ReliabilityDiagram {
  int bin_count{kDefaultBins};
  std::vector<ReliabilityBin> bins;
  std::size_t n{0};
  double overall_accuracy{0};
  double overall_confidence{0};
};

/// 0-based bin of `confidence` under the right-inclusive rule.
int bin_index(double confidence, int bin_count);

ReliabilityDiagram reliability(std::span<const double> confidence, std::span<const int> correct,
                               int bin_count = kDefaultBins);

/// sum_m |B_m|/n |acc(B_m) - conf(B_m)|
double ece(const ReliabilityDiagram& diagram);
/// max over non-empty bins of |acc(B_m) - conf(B_m)|
double mce(const ReliabilityDiagram& diagram);

/// Binary NLL of top-1 correctness under confidence p.
double nll_binary(std::span<const double> confidence, std::span<const int> correct);
/// mean (p - c)^2
double brier_binary(std::span<const double> confidence, std::span<const int> correct);

/// -mean log p[label] over the full probability matrix.
double nll_multiclass(const MatrixXd& probabilities, std::span<const int> labels);
/// mean sum_k (p_k - [k == label])^2
double brier_multiclass(const MatrixXd& probabilities, std::span<const int> labels);

struct MetricsReport {
  double ece{0};
  double mce{0};
  double nll{0};    // binary, top-1
  double brier{0};  // binary, top-1
  std::optional<double> nll_multiclass;
  std::optional<double> brier_multiclass;
  double accuracy{0};
  double mean_confidence{0};
  std::optional<double> mean_variance;
  int bin_count{kDefaultBins};
  std::size_t clamp_count{0};
  std::size_t n{0};
};

MetricsReport compute_metrics(std::span<const double> confidence, std::span<const int> correct,
                              int bin_count = kDefaultBins);

/// Fixed-precision real formatting shared by every text output.
std::string format_real(double value);

/// Flat `key=value` lines, one per field, fixed order.
std::string to_record(const MetricsReport& report);

bool operator==(const MetricsReport& a, const MetricsReport& b);

}  // namespace salgp
