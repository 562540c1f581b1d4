#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "salgp/ingest.hpp"

namespace salgp {

/// Knobs for a synthetic miscalibrated classifier. Layer l of L gets
/// class-mean spread separation * l / L, so deeper layers separate the
/// classes better. Logits are the Bayes posterior log-odds computed from
/// the deepest layer, hence calibrated when bias and label noise are 0.
struct SyntheticSpec {
  int n_train{300};
  int n_test{1000};
  int k_classes{5};
  std::vector<int> layer_dims{8, 8, 8, 8, 8};
  double overconfidence_bias{0.0};  // added to the winning logit
  double label_noise{0.0};          // probability of relabelling to another class
  std::uint64_t seed{0};
  int channels{3};
  double separation{0.6};
  double feature_noise{1.0};

  void validate() const;
};

struct SyntheticDumps {
  FeatureDump train;
  FeatureDump test;
};

SyntheticDumps generate_dumps(const SyntheticSpec& spec);

/// Writes `out/train` and `out/test` dump directories.
SyntheticDumps generate(const SyntheticSpec& spec, const std::filesystem::path& out);

}  // namespace salgp
