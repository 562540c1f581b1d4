#pragma once

#include <vector>

#include "salgp/types.hpp"

namespace salgp {

/// Per-dimension affine map z = (x - mean) / scale fitted on a training
/// split. Dimensions with zero variance keep scale 1 (centred only).
struct Standardizer {
  VectorXd mean;
  VectorXd scale;

  static Standardizer fit(const std::vector<Sample>& samples);
  static Standardizer identity(Eigen::Index width);

  Eigen::Index width() const { return mean.size(); }
  VectorXd apply(const VectorXd& features) const;
  void apply_in_place(std::vector<Sample>& samples) const;
};

}  // namespace salgp
