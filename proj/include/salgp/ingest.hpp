#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "salgp/types.hpp"

namespace salgp {

/// Per-layer activations, either (N,C,H,W) for convolutional layers or
/// (N,D) for flat representations. Values are row-major.
struct LayerTensor {
  int layer_index{1};
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  std::int64_t samples() const { return shape.empty() ? 0 : shape.front(); }
  /// Number of values per sample.
  std::int64_t row_width() const;
  bool is_spatial() const { return shape.size() == 4; }
  void validate() const;
};

/// A dataset split exported from a classifier: per-layer features plus the
/// softmax outputs, labels and predicted classes.
struct FeatureDump {
  std::string split_name;
  std::vector<LayerTensor> layers;
  MatrixXd softmax;  // N x K
  std::vector<int> labels;
  std::vector<int> predictions;
  std::optional<MatrixXd> logits;  // N x K when the exporter kept them

  std::int64_t size() const { return softmax.rows(); }
  std::int64_t classes() const { return softmax.cols(); }
  const LayerTensor& layer(int index) const;
  bool has_layer(int index) const;
  std::vector<int> layer_indices() const;

  /// Checks every invariant; throws DumpError naming the offending row.
  void validate() const;
};

/// Reads `manifest.json` plus the binary payload files from `dir`.
FeatureDump load_dump(const std::filesystem::path& dir);

/// Writes `dump` in the directory layout understood by load_dump.
void write_dump(const FeatureDump& dump, const std::filesystem::path& dir);

/// Pools an (N,C,H,W) tensor across channels into (N, H*W). Flat tensors
/// pass through unchanged.
LayerTensor pool_channels(const LayerTensor& tensor, PoolingMode mode);

/// Emits one sample per (record, layer), layer-major in the order given.
/// Features are pooled, flattened row-major and zero-padded on the right
/// to the widest pooled layer among `layers`.
std::vector<Sample> build_samples(const FeatureDump& dump, PoolingMode mode,
                                  const std::vector<int>& layers);

/// Maximum softmax probability per record.
VectorXd top1_confidence(const FeatureDump& dump);

/// 1 where label == prediction.
std::vector<int> correctness(const FeatureDump& dump);

/// Parses "1-5", "3", "1,3,5" or "1-3,5" into an ordered list of indices.
std::vector<int> parse_layer_list(const std::string& text);

}  // namespace salgp
