#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace salgp {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files.
class DumpError : public Error {
 public:
  using Error::Error;
};

/// Arguments that violate a function's preconditions.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Cholesky failure or non-finite objective during GP work.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Layer index used for layer-agnostic (global) queries. Never matches a
/// training layer, so every Kronecker-delta term vanishes.
inline constexpr int kGlobalLayer = -1;

/// One GP datum: pooled feature vector, top-1 confidence, layer tag and the
/// softmax residual `correctness - confidence`.
template <typename Scalar>
struct CalibrationSample {
  Vector<Scalar> features;
  Scalar confidence{0};
  int layer_index{1};
  int correctness{0};
  Scalar residual{0};
};

using Sample = CalibrationSample<double>;

enum class PoolingMode { max, avg };

PoolingMode parse_pooling(const std::string& name);
std::string to_string(PoolingMode mode);

}  // namespace salgp
