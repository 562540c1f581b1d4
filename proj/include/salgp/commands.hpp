#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "salgp/baselines.hpp"
#include "salgp/calibration.hpp"
#include "salgp/synthetic.hpp"
#include "salgp/tables.hpp"

namespace salgp::cli {

namespace fs = std::filesystem;

struct TrainOptions {
  fs::path dump;
  fs::path out{"model.json"};
  std::string method{"sal-ml"};
  std::string layers;  // SAL variants, e.g. "1-5"
  int layer{0};        // single-gp
  std::string pooling{"avg"};
  std::string base{"matern25"};
  int iters{2000};
  double learning_rate{5e-3};
  std::uint64_t seed{0};
};

struct EvaluateOptions {
  std::optional<fs::path> model;  // absent: uncalibrated (identity) report
  fs::path dump;
  std::string mode{"global"};
  fs::path out_dir{"eval"};
  std::string format{"tsv"};
  int bins{kDefaultBins};
};

struct CalibrateOptions {
  fs::path model;
  fs::path dump;
  std::string mode{"global"};
  fs::path out{"calibrated.tsv"};
  std::string format{"tsv"};
};

struct CompareOptions {
  fs::path train;
  fs::path test;
  std::optional<fs::path> validation;  // temperature-scaling split, default: train
  std::string layers{"1-5"};
  std::string pooling{"both"};  // max | avg | both
  std::string methods{"uncalibrated,temperature,single-gp,sal-ml,sal-hl"};
  std::string base{"matern25"};
  int iters{2000};
  double learning_rate{5e-3};
  std::uint64_t seed{0};
  double temperature_init{1.0};
  int temperature_iters{200};
  int bins{kDefaultBins};
  fs::path out_dir{"compare"};
  std::string format{"tsv"};
};

struct SynthOptions {
  SyntheticSpec spec;
  fs::path out{"synthetic"};
};

/// Trains and writes the model archive; returns the final log marginal
/// likelihood.
double cmd_train(const TrainOptions& options);

/// Writes metrics.txt, reliability, residual and calibrated tables to out_dir.
MetricsReport cmd_evaluate(const EvaluateOptions& options);

void cmd_calibrate(const CalibrateOptions& options);

/// Table-shaped comparison of every requested method, plus one
/// reliability table per row under out_dir/reliability/.
Table cmd_compare(const CompareOptions& options);

void cmd_synth(const SynthOptions& options);

/// Full command-line entry point (argument parsing, config echo, exit code).
int run(int argc, char** argv);

}  // namespace salgp::cli
