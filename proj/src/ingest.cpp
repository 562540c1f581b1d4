#include "salgp/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace salgp {

namespace fs = std::filesystem;
using nlohmann::json;

PoolingMode parse_pooling(const std::string& name) {
  if (name == "max") return PoolingMode::max;
  if (name == "avg" || name == "average") return PoolingMode::avg;
  throw ArgumentError("unknown pooling mode '" + name + "' (expected max or avg)");
}

std::string to_string(PoolingMode mode) { return mode == PoolingMode::max ? "max" : "avg"; }

namespace {

template <typename T>
T from_little(T value) {
  static_assert(sizeof(T) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bits = std::bit_cast<std::uint32_t>(value);
    bits = (bits >> 24) | ((bits >> 8) & 0xff00u) | ((bits << 8) & 0xff0000u) | (bits << 24);
    return std::bit_cast<T>(bits);
  }
}

template <typename T>
std::vector<T> read_flat(const fs::path& file, std::size_t expected) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw DumpError("missing file: " + file.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(T)) {
    std::ostringstream msg;
    msg << "shape mismatch in " << file.filename().string() << ": manifest implies " << expected
        << " values, file holds " << bytes / sizeof(T)
        << (bytes % sizeof(T) ? " (plus trailing bytes)" : "");
    throw DumpError(msg.str());
  }
  std::vector<T> values(expected);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DumpError("read failure: " + file.string());
  for (auto& v : values) v = from_little(v);
  return values;
}

template <typename T>
void write_flat(const fs::path& file, const std::vector<T>& values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DumpError("cannot open for writing: " + file.string());
  for (T v : values) {
    const T le = from_little(v);  // byte swap is its own inverse
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
  }
  if (!out) throw DumpError("write failure: " + file.string());
}

std::vector<float> matrix_to_f32(const MatrixXd& m) {
  std::vector<float> flat(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      flat[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<float>(m(i, j));
  return flat;
}

MatrixXd f32_to_matrix(const std::vector<float>& flat, std::int64_t rows, std::int64_t cols) {
  MatrixXd m(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
  return m;
}

std::size_t product(const std::vector<std::int64_t>& shape) {
  return static_cast<std::size_t>(
      std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>()));
}

}  // namespace

std::int64_t LayerTensor::row_width() const {
  if (shape.size() < 2) return 0;
  return std::accumulate(shape.begin() + 1, shape.end(), std::int64_t{1}, std::multiplies<>());
}

void LayerTensor::validate() const {
  if (shape.size() != 2 && shape.size() != 4)
    throw DumpError("layer " + std::to_string(layer_index) + ": shape must be (N,D) or (N,C,H,W)");
  for (auto d : shape)
    if (d <= 0) throw DumpError("layer " + std::to_string(layer_index) + ": non-positive dimension");
  if (values.size() != product(shape))
    throw DumpError("layer " + std::to_string(layer_index) + ": value count " +
                    std::to_string(values.size()) + " does not match shape product " +
                    std::to_string(product(shape)));
}

const LayerTensor& FeatureDump::layer(int index) const {
  for (const auto& l : layers)
    if (l.layer_index == index) return l;
  throw ArgumentError("unknown layer index " + std::to_string(index));
}

bool FeatureDump::has_layer(int index) const {
  return std::any_of(layers.begin(), layers.end(),
                     [index](const LayerTensor& l) { return l.layer_index == index; });
}

std::vector<int> FeatureDump::layer_indices() const {
  std::vector<int> out;
  for (const auto& l : layers) out.push_back(l.layer_index);
  return out;
}

void FeatureDump::validate() const {
  const auto n = size();
  const auto k = classes();
  if (n <= 0 || k <= 0) throw DumpError("dump has no records or no classes");
  if (static_cast<std::int64_t>(labels.size()) != n ||
      static_cast<std::int64_t>(predictions.size()) != n)
    throw DumpError("labels/predictions length does not match softmax rows");
  if (logits && (logits->rows() != n || logits->cols() != k))
    throw DumpError("logits shape does not match softmax");

  for (std::int64_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double p = softmax(i, j);
      if (!(p >= 0.0 && p <= 1.0))
        throw DumpError("softmax row " + std::to_string(i) + " has an entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      std::ostringstream msg;
      msg << "softmax row " << i << " is not normalized (sums to " << sum << ")";
      throw DumpError(msg.str());
    }
    Eigen::Index arg = 0;
    softmax.row(i).maxCoeff(&arg);
    if (predictions[static_cast<std::size_t>(i)] != static_cast<int>(arg))
      throw DumpError("prediction " + std::to_string(i) + " is not the softmax argmax");
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k)
      throw DumpError("label " + std::to_string(i) + " out of range");
  }

  for (const auto& l : layers) {
    if (l.layer_index < 1) throw DumpError("layer indices must be >= 1");
    l.validate();
    if (l.samples() != n)
      throw DumpError("layer " + std::to_string(l.layer_index) + " holds " +
                      std::to_string(l.samples()) + " samples, expected " + std::to_string(n));
  }
  auto idx = layer_indices();
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw DumpError("duplicate layer index in dump");
}

FeatureDump load_dump(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DumpError("missing file: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DumpError("malformed manifest: " + std::string(e.what()));
  }

  FeatureDump dump;
  std::int64_t n = 0, k = 0;
  try {
    if (manifest.value("dtype", "f32") != "f32") throw DumpError("unsupported dtype");
    if (manifest.value("endianness", "little") != "little")
      throw DumpError("unsupported endianness");
    dump.split_name = manifest.value("split", "");
    n = manifest.at("n").get<std::int64_t>();
    k = manifest.at("k").get<std::int64_t>();
    if (n <= 0 || k <= 0) throw DumpError("manifest n and k must be positive");
    for (const auto& entry : manifest.at("layers")) {
      LayerTensor t;
      t.layer_index = entry.at("index").get<int>();
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      if (t.shape.empty() || t.shape.front() != n)
        throw DumpError("layer " + std::to_string(t.layer_index) +
                        ": manifest shape disagrees with n");
      dump.layers.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DumpError("malformed manifest: " + std::string(e.what()));
  }

  const auto nk = static_cast<std::size_t>(n * k);
  dump.softmax = f32_to_matrix(read_flat<float>(dir / "softmax.f32", nk), n, k);
  dump.labels = read_flat<std::int32_t>(dir / "labels.i32", static_cast<std::size_t>(n));
  dump.predictions =
      read_flat<std::int32_t>(dir / "predictions.i32", static_cast<std::size_t>(n));
  if (fs::exists(dir / "logits.f32"))
    dump.logits = f32_to_matrix(read_flat<float>(dir / "logits.f32", nk), n, k);

  for (auto& t : dump.layers) {
    for (auto d : t.shape)
      if (d <= 0) throw DumpError("layer " + std::to_string(t.layer_index) + ": bad shape");
    t.values = read_flat<float>(dir / ("layer_" + std::to_string(t.layer_index) + ".f32"),
                                product(t.shape));
  }
  dump.validate();
  return dump;
}

void write_dump(const FeatureDump& dump, const fs::path& dir) {
  dump.validate();
  fs::create_directories(dir);

  json manifest;
  manifest["split"] = dump.split_name;
  manifest["n"] = dump.size();
  manifest["k"] = dump.classes();
  manifest["dtype"] = "f32";
  manifest["endianness"] = "little";
  manifest["layers"] = json::array();
  for (const auto& l : dump.layers)
    manifest["layers"].push_back({{"index", l.layer_index}, {"shape", l.shape}});
  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw DumpError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
  }

  write_flat(dir / "softmax.f32", matrix_to_f32(dump.softmax));
  write_flat(dir / "labels.i32", std::vector<std::int32_t>(dump.labels.begin(), dump.labels.end()));
  write_flat(dir / "predictions.i32",
             std::vector<std::int32_t>(dump.predictions.begin(), dump.predictions.end()));
  if (dump.logits) write_flat(dir / "logits.f32", matrix_to_f32(*dump.logits));
  else fs::remove(dir / "logits.f32");
  for (const auto& l : dump.layers)
    write_flat(dir / ("layer_" + std::to_string(l.layer_index) + ".f32"), l.values);
}

LayerTensor pool_channels(const LayerTensor& tensor, PoolingMode mode) {
  tensor.validate();
  if (!tensor.is_spatial()) return tensor;

  const auto n = tensor.shape[0], c = tensor.shape[1], h = tensor.shape[2], w = tensor.shape[3];
  const auto plane = h * w;
  LayerTensor out;
  out.layer_index = tensor.layer_index;
  out.shape = {n, plane};
  out.values.resize(static_cast<std::size_t>(n * plane));

  for (std::int64_t i = 0; i < n; ++i) {
    const float* sample = tensor.values.data() + i * c * plane;
    float* dst = out.values.data() + i * plane;
    for (std::int64_t p = 0; p < plane; ++p) {
      if (mode == PoolingMode::max) {
        float best = sample[p];
        for (std::int64_t ch = 1; ch < c; ++ch) best = std::max(best, sample[ch * plane + p]);
        dst[p] = best;
      } else {
        double sum = 0.0;
        for (std::int64_t ch = 0; ch < c; ++ch) sum += sample[ch * plane + p];
        dst[p] = static_cast<float>(sum / static_cast<double>(c));
      }
    }
  }
  return out;
}

VectorXd top1_confidence(const FeatureDump& dump) { return dump.softmax.rowwise().maxCoeff(); }

std::vector<int> correctness(const FeatureDump& dump) {
  std::vector<int> c(dump.labels.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = dump.labels[i] == dump.predictions[i] ? 1 : 0;
  return c;
}

std::vector<Sample> build_samples(const FeatureDump& dump, PoolingMode mode,
                                  const std::vector<int>& layers) {
  if (layers.empty()) throw ArgumentError("no layers requested");
  std::vector<LayerTensor> pooled;
  pooled.reserve(layers.size());
  std::int64_t width = 0;
  for (int index : layers) {
    pooled.push_back(pool_channels(dump.layer(index), mode));
    width = std::max(width, pooled.back().row_width());
  }

  const auto conf = top1_confidence(dump);
  const auto correct = correctness(dump);
  const auto n = dump.size();

  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(n) * layers.size());
  for (const auto& t : pooled) {
    const auto d = t.row_width();
    for (std::int64_t i = 0; i < n; ++i) {
      Sample s;
      s.features = VectorXd::Zero(width);
      const float* row = t.values.data() + i * d;
      for (std::int64_t j = 0; j < d; ++j) s.features[j] = row[j];
      s.confidence = conf[i];
      s.layer_index = t.layer_index;
      s.correctness = correct[static_cast<std::size_t>(i)];
      s.residual = static_cast<double>(s.correctness) - s.confidence;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<int> parse_layer_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ArgumentError("bad layer list '" + text + "'");
    return v;
  };
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_int(part));
    } else {
      const int lo = to_int(part.substr(0, dash));
      const int hi = to_int(part.substr(dash + 1));
      if (hi < lo) throw ArgumentError("bad layer range '" + part + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
  }
  if (out.empty()) throw ArgumentError("empty layer list");
  for (int v : out)
    if (v < 1) throw ArgumentError("layer indices must be >= 1");
  auto sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ArgumentError("duplicate layer in '" + text + "'");
  return out;
}

}  // namespace salgp
