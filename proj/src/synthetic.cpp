#include "salgp/synthetic.hpp"

#include <cmath>
#include <random>

namespace salgp {

void SyntheticSpec::validate() const {
  if (n_train < 1 || n_test < 1 || k_classes < 2 || channels < 1 || layer_dims.empty())
    throw ArgumentError("synthetic spec: sizes must be positive and k_classes >= 2");
  for (int d : layer_dims)
    if (d < 1) throw ArgumentError("synthetic spec: layer widths must be positive");
  if (overconfidence_bias < 0) throw ArgumentError("synthetic spec: bias must be >= 0");
  if (!(label_noise >= 0 && label_noise < 1))
    throw ArgumentError("synthetic spec: label_noise must lie in [0,1)");
  if (!(separation > 0 && feature_noise > 0))
    throw ArgumentError("synthetic spec: separation and feature_noise must be positive");
}

namespace {

struct World {
  std::vector<MatrixXd> means;  // per layer: K x D
};

FeatureDump draw_split(const SyntheticSpec& spec, const World& world, int n,
                       const std::string& name, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> klass(0, spec.k_classes - 1);
  std::uniform_int_distribution<int> other(1, spec.k_classes - 1);

  const int layers = static_cast<int>(spec.layer_dims.size());
  const int c = spec.channels;
  const double sigma = spec.feature_noise;

  FeatureDump dump;
  dump.split_name = name;
  for (int l = 0; l < layers; ++l) {
    LayerTensor t;
    t.layer_index = l + 1;
    t.shape = {n, c, 1, spec.layer_dims[static_cast<std::size_t>(l)]};
    t.values.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
                     static_cast<std::size_t>(spec.layer_dims[static_cast<std::size_t>(l)]));
    dump.layers.push_back(std::move(t));
  }
  MatrixXd logits(n, spec.k_classes);
  dump.labels.resize(static_cast<std::size_t>(n));

  const MatrixXd& deep = world.means.back();
  const double precision = static_cast<double>(c) / (sigma * sigma);
  for (int i = 0; i < n; ++i) {
    const int y = klass(rng);
    VectorXd deep_mean;
    for (int l = 0; l < layers; ++l) {
      const int d = spec.layer_dims[static_cast<std::size_t>(l)];
      VectorXd channel_sum = VectorXd::Zero(d);
      auto& values = dump.layers[static_cast<std::size_t>(l)].values;
      for (int ch = 0; ch < c; ++ch)
        for (int j = 0; j < d; ++j) {
          const double v = world.means[static_cast<std::size_t>(l)](y, j) + sigma * normal(rng);
          values.push_back(static_cast<float>(v));
          channel_sum[j] += static_cast<double>(static_cast<float>(v));
        }
      if (l == layers - 1) deep_mean = channel_sum / static_cast<double>(c);
    }
    // Bayes log-posterior under equal priors and isotropic noise of the
    // channel average, shifted per row.
    for (int k = 0; k < spec.k_classes; ++k)
      logits(i, k) = precision * (deep.row(k).dot(deep_mean) - 0.5 * deep.row(k).squaredNorm());
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    logits(i, arg) += spec.overconfidence_bias;

    int label = y;
    if (unit(rng) < spec.label_noise) label = (y + other(rng)) % spec.k_classes;
    dump.labels[static_cast<std::size_t>(i)] = label;
  }

  dump.softmax.resize(n, spec.k_classes);
  dump.predictions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::ArrayXd z = logits.row(i).transpose().array();
    const Eigen::ArrayXd e = (z - z.maxCoeff()).exp();
    Eigen::ArrayXd p = e / e.sum();
    // round through f32 so the stored softmax and argmax agree exactly
    for (Eigen::Index k = 0; k < p.size(); ++k) p[k] = static_cast<double>(static_cast<float>(p[k]));
    dump.softmax.row(i) = p.matrix().transpose();
    Eigen::Index arg = 0;
    dump.softmax.row(i).maxCoeff(&arg);
    dump.predictions[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  logits = logits.cast<float>().cast<double>();
  dump.logits = logits;
  dump.validate();
  return dump;
}

}  // namespace

SyntheticDumps generate_dumps(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  World world;
  const int layers = static_cast<int>(spec.layer_dims.size());
  for (int l = 0; l < layers; ++l) {
    const double spread = spec.separation * static_cast<double>(l + 1) / layers;
    MatrixXd m(spec.k_classes, spec.layer_dims[static_cast<std::size_t>(l)]);
    for (Eigen::Index k = 0; k < m.rows(); ++k)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(k, j) = spread * normal(rng);
    world.means.push_back(std::move(m));
  }

  SyntheticDumps out;
  out.train = draw_split(spec, world, spec.n_train, "train", rng);
  out.test = draw_split(spec, world, spec.n_test, "test", rng);
  return out;
}

SyntheticDumps generate(const SyntheticSpec& spec, const std::filesystem::path& out) {
  auto dumps = generate_dumps(spec);
  write_dump(dumps.train, out / "train");
  write_dump(dumps.test, out / "test");
  return dumps;
}

}  // namespace salgp
