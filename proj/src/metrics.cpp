#include "salgp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace salgp {

namespace {

void check_pairs(std::span<const double> confidence, std::span<const int> correct) {
  if (confidence.empty()) throw ArgumentError("no (confidence, correctness) pairs");
  if (confidence.size() != correct.size())
    throw ArgumentError("confidence and correctness lengths differ");
}

double clip(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

}  // namespace

int bin_index(double confidence, int bin_count) {
  if (bin_count < 1) throw ArgumentError("bin count must be >= 1");
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw ArgumentError("confidence outside [0,1]");
  const double m = static_cast<double>(bin_count);
  int idx = static_cast<int>(std::ceil(confidence * m)) - 1;
  idx = std::clamp(idx, 0, bin_count - 1);
  // edges are the doubles k/M; product rounding can push a value one bin out
  while (idx > 0 && confidence <= static_cast<double>(idx) / m) --idx;
  while (idx < bin_count - 1 && confidence > static_cast<double>(idx + 1) / m) ++idx;
  return idx;
}

ReliabilityDiagram reliability(std::span<const double> confidence, std::span<const int> correct,
                               int bin_count) {
  check_pairs(confidence, correct);
  if (bin_count < 1) throw ArgumentError("bin count must be >= 1");
  ReliabilityDiagram d;
  d.bin_count = bin_count;
  d.n = confidence.size();
  d.bins.resize(static_cast<std::size_t>(bin_count));
  std::vector<double> conf_sum(d.bins.size(), 0.0), hit_sum(d.bins.size(), 0.0);
  double all_conf = 0.0, all_hit = 0.0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const auto b = static_cast<std::size_t>(bin_index(confidence[i], bin_count));
    ++d.bins[b].count;
    conf_sum[b] += confidence[i];
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
    all_conf += confidence[i];
    all_hit += correct[i] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < d.bins.size(); ++b) {
    auto& bin = d.bins[b];
    bin.lo = static_cast<double>(b) / bin_count;
    bin.hi = static_cast<double>(b + 1) / bin_count;
    if (bin.count > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
      bin.accuracy = hit_sum[b] / static_cast<double>(bin.count);
    }
  }
  d.overall_accuracy = all_hit / static_cast<double>(d.n);
  d.overall_confidence = all_conf / static_cast<double>(d.n);
  return d;
}

double ece(const ReliabilityDiagram& diagram) {
  double total = 0.0;
  for (const auto& b : diagram.bins)
    if (b.count > 0)
      total += static_cast<double>(b.count) / static_cast<double>(diagram.n) *
               std::abs(b.accuracy - b.mean_confidence);
  return total;
}

double mce(const ReliabilityDiagram& diagram) {
  double worst = 0.0;
  for (const auto& b : diagram.bins)
    if (b.count > 0) worst = std::max(worst, std::abs(b.accuracy - b.mean_confidence));
  return worst;
}

double nll_binary(std::span<const double> confidence, std::span<const int> correct) {
  check_pairs(confidence, correct);
  double total = 0.0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const double p = clip(confidence[i]);
    total -= correct[i] ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(confidence.size());
}

double brier_binary(std::span<const double> confidence, std::span<const int> correct) {
  check_pairs(confidence, correct);
  double total = 0.0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const double d = confidence[i] - (correct[i] ? 1.0 : 0.0);
    total += d * d;
  }
  return total / static_cast<double>(confidence.size());
}

double nll_multiclass(const MatrixXd& probabilities, std::span<const int> labels) {
  if (probabilities.rows() == 0 || static_cast<std::size_t>(probabilities.rows()) != labels.size())
    throw ArgumentError("probabilities and labels disagree in length");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i)
    total -= std::log(clip(probabilities(i, labels[static_cast<std::size_t>(i)])));
  return total / static_cast<double>(probabilities.rows());
}

double brier_multiclass(const MatrixXd& probabilities, std::span<const int> labels) {
  if (probabilities.rows() == 0 || static_cast<std::size_t>(probabilities.rows()) != labels.size())
    throw ArgumentError("probabilities and labels disagree in length");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i)
    for (Eigen::Index k = 0; k < probabilities.cols(); ++k) {
      const double d = probabilities(i, k) - (k == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
      total += d * d;
    }
  return total / static_cast<double>(probabilities.rows());
}

MetricsReport compute_metrics(std::span<const double> confidence, std::span<const int> correct,
                              int bin_count) {
  const auto d = reliability(confidence, correct, bin_count);
  MetricsReport r;
  r.ece = ece(d);
  r.mce = mce(d);
  r.nll = nll_binary(confidence, correct);
  r.brier = brier_binary(confidence, correct);
  r.accuracy = d.overall_accuracy;
  r.mean_confidence = d.overall_confidence;
  r.bin_count = bin_count;
  r.n = d.n;
  return r;
}

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

std::string to_record(const MetricsReport& r) {
  std::ostringstream out;
  out << "n=" << r.n << '\n'
      << "bins=" << r.bin_count << '\n'
      << "accuracy=" << format_real(r.accuracy) << '\n'
      << "mean_confidence=" << format_real(r.mean_confidence) << '\n'
      << "ece=" << format_real(r.ece) << '\n'
      << "mce=" << format_real(r.mce) << '\n'
      << "nll_top1=" << format_real(r.nll) << '\n'
      << "brier_top1=" << format_real(r.brier) << '\n';
  if (r.nll_multiclass) out << "nll_multiclass=" << format_real(*r.nll_multiclass) << '\n';
  if (r.brier_multiclass) out << "brier_multiclass=" << format_real(*r.brier_multiclass) << '\n';
  if (r.mean_variance) out << "mean_variance=" << format_real(*r.mean_variance) << '\n';
  out << "clamp_count=" << r.clamp_count << '\n';
  return out.str();
}

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  return a.ece == b.ece && a.mce == b.mce && a.nll == b.nll && a.brier == b.brier &&
         a.nll_multiclass == b.nll_multiclass && a.brier_multiclass == b.brier_multiclass &&
         a.accuracy == b.accuracy && a.mean_confidence == b.mean_confidence &&
         a.mean_variance == b.mean_variance && a.bin_count == b.bin_count &&
         a.clamp_count == b.clamp_count && a.n == b.n;
}

}  // namespace salgp
