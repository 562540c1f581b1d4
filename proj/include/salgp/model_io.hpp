#pragma once

#include <filesystem>
#include <string>

#include "salgp/calibration.hpp"

namespace salgp {

inline constexpr int kModelFormatVersion = 1;

/// Self-describing JSON archive: version, config block (kernel spec and
/// calibrator settings), standardizer, training samples, hyperparameters
/// and training log. The Cholesky factor is rebuilt on load.
std::string serialize_model(const Calibrator& calibrator);
Calibrator deserialize_model(const std::string& text);

void save_model(const Calibrator& calibrator, const std::filesystem::path& path);
Calibrator load_model(const std::filesystem::path& path);

}  // namespace salgp
