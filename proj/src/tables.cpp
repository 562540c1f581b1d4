#include "salgp/tables.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace salgp {

TableFormat parse_table_format(const std::string& name) {
  if (name == "tsv") return TableFormat::tsv;
  if (name == "jsonlines" || name == "jsonl") return TableFormat::jsonlines;
  throw ArgumentError("unknown table format '" + name + "' (expected tsv or jsonlines)");
}

std::string extension(TableFormat format) { return format == TableFormat::tsv ? ".tsv" : ".jsonl"; }

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw ArgumentError("table row has wrong number of cells");
  rows.push_back(std::move(row));
}

namespace {

std::string cell_text(const Cell& c, bool json) {
  if (const auto* s = std::get_if<std::string>(&c)) return json ? nlohmann::json(*s).dump() : *s;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  const double d = std::get<double>(c);
  if (json && !std::isfinite(d)) return "null";
  return format_real(d);
}

}  // namespace

std::string Table::render(TableFormat format) const {
  std::ostringstream out;
  if (format == TableFormat::tsv) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "\t" : "") << columns[c];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "\t" : "") << cell_text(row[c], false);
      out << '\n';
    }
  } else {
    for (const auto& row : rows) {
      out << '{';
      for (std::size_t c = 0; c < row.size(); ++c)
        out << (c ? "," : "") << nlohmann::json(columns[c]).dump() << ':' << cell_text(row[c], true);
      out << "}\n";
    }
  }
  return out.str();
}

Table reliability_table(const ReliabilityDiagram& diagram) {
  Table t{{"bin_lo", "bin_hi", "count", "confidence", "accuracy"}, {}};
  for (const auto& b : diagram.bins)
    t.add({b.lo, b.hi, static_cast<std::int64_t>(b.count), b.mean_confidence, b.accuracy});
  return t;
}

Table residual_table(const CalibrationResult& result) {
  Table t{{"index", "layer", "confidence", "true_residual", "predicted_mean", "band_lo", "band_hi"},
          {}};
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& r = result.records[i];
    const double sd = std::sqrt(r.variance);
    t.add({static_cast<std::int64_t>(i), static_cast<std::int64_t>(r.layer), r.raw,
           static_cast<double>(r.correct) - r.raw, r.posterior_mean, r.posterior_mean - 2 * sd,
           r.posterior_mean + 2 * sd});
  }
  return t;
}

Table calibrated_table(const CalibrationResult& result) {
  Table t{{"index", "raw", "mean", "mean_unclamped", "variance", "correct"}, {}};
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& r = result.records[i];
    t.add({static_cast<std::int64_t>(i), r.raw, r.mean, r.mean_unclamped, r.variance,
           static_cast<std::int64_t>(r.correct)});
  }
  return t;
}

}  // namespace salgp
