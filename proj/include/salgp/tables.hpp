#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "salgp/calibration.hpp"
#include "salgp/metrics.hpp"

namespace salgp {

enum class TableFormat { tsv, jsonlines };

TableFormat parse_table_format(const std::string& name);
std::string extension(TableFormat format);

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  std::string render(TableFormat format) const;
};

/// bin_lo, bin_hi, count, confidence, accuracy
Table reliability_table(const ReliabilityDiagram& diagram);

/// Per-record residual fit: true residual, predicted mean and a +-2 sigma band.
Table residual_table(const CalibrationResult& result);

/// Per-record calibrated output: raw, clamped and unclamped mean, variance, correctness.
Table calibrated_table(const CalibrationResult& result);

}  // namespace salgp
