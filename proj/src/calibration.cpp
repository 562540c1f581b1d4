#include "salgp/calibration.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace salgp {

Method parse_method(const std::string& name) {
  if (name == "single-gp" || name == "single_gp") return Method::single_gp;
  if (name == "sal-ml" || name == "sal_ml") return Method::sal_ml;
  if (name == "sal-hl" || name == "sal_hl") return Method::sal_hl;
  throw ArgumentError("unknown method '" + name + "' (expected single-gp, sal-ml or sal-hl)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::single_gp: return "single-gp";
    case Method::sal_ml: return "sal-ml";
    case Method::sal_hl: return "sal-hl";
  }
  return "?";
}

KernelVariant variant_for(Method method) {
  switch (method) {
    case Method::single_gp: return KernelVariant::single_sum;
    case Method::sal_ml: return KernelVariant::multilayer_additive;
    case Method::sal_hl: return KernelVariant::hierarchical_layer;
  }
  return KernelVariant::single_sum;
}

void CalibratorConfig::validate() const {
  if (layers.empty()) throw ArgumentError("layer selection is empty");
  if (method == Method::single_gp && layers.size() != 1)
    throw ArgumentError("single-gp uses exactly one layer");
  if (opt.iters < 0) throw ArgumentError("iters must be >= 0");
  if (!(opt.learning_rate > 0)) throw ArgumentError("learning rate must be positive");
  if (opt.min_lengthscale < 0) throw ArgumentError("lengthscale floor must be >= 0");
}

KernelSpec CalibratorConfig::kernel_spec() const {
  KernelSpec spec;
  spec.base = base;
  spec.variant = variant_for(method);
  spec.layers = layers;
  return spec;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

constexpr std::size_t kHeuristicSubsample = 256;

}  // namespace

constexpr double kLocalInitScale = 0.1;

HyperParams<double> initial_hyperparams(const std::vector<Sample>& samples, const KernelSpec& spec,
                                        std::uint64_t seed) {
  auto hp = default_hyperparams<double>(spec);
  std::vector<std::size_t> pick(samples.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  if (pick.size() > kHeuristicSubsample) {
    std::mt19937_64 rng(seed);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(kHeuristicSubsample);
    std::sort(pick.begin(), pick.end());
  }
  std::vector<double> fd, cd;
  for (std::size_t a = 0; a < pick.size(); ++a)
    for (std::size_t b = a + 1; b < pick.size(); ++b) {
      const auto& x = samples[pick[a]];
      const auto& y = samples[pick[b]];
      fd.push_back((x.features - y.features).norm());
      cd.push_back(std::abs(x.confidence - y.confidence));
    }
  const double feat_ls = std::max(median(fd), 1e-3);
  const double conf_ls = std::max(median(cd), 0.05);
  for (auto* p : {&hp.base, &hp.layer}) {
    p->feat_lengthscale = feat_ls;
    p->conf_lengthscale = conf_ls;
  }
  // layer-specific terms start as small deviations from the shared prior
  hp.layer.feat_variance = kLocalInitScale;
  hp.layer.conf_variance = kLocalInitScale;
  hp.layer_variances.setConstant(kLocalInitScale);
  return hp;
}

Calibrator train_calibrator(const FeatureDump& train, const CalibratorConfig& config) {
  config.validate();
  for (int l : config.layers)
    if (!train.has_layer(l))
      throw ArgumentError("training dump has no layer " + std::to_string(l));
  auto samples = build_samples(train, config.pooling, config.layers);
  auto standardizer = Standardizer::fit(samples);
  standardizer.apply_in_place(samples);
  const auto spec = config.kernel_spec();
  const auto init = initial_hyperparams(samples, spec, config.opt.seed);
  auto gp = fit(std::move(samples), spec, init, config.opt);
  return Calibrator{config, std::move(standardizer), std::move(gp)};
}

CalibrationMode CalibrationMode::parse(const std::string& text) {
  if (text == "global") return {true, 0};
  const std::string prefix = "local:";
  if (text.rfind(prefix, 0) == 0) {
    const auto rest = text.substr(prefix.size());
    std::size_t used = 0;
    int layer = 0;
    try {
      layer = std::stoi(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == rest.size() && !rest.empty() && layer >= 1) return {false, layer};
  }
  throw ArgumentError("bad mode '" + text + "' (expected global or local:<layer>)");
}

std::string CalibrationMode::str() const {
  return global ? "global" : "local:" + std::to_string(layer);
}

CalibratedConfidence corrected_confidence(double raw, double posterior_mean, double variance) {
  CalibratedConfidence c;
  c.raw = raw;
  c.posterior_mean = posterior_mean;
  c.mean_unclamped = raw + posterior_mean;
  c.mean = std::clamp(c.mean_unclamped, 0.0, 1.0);
  c.variance = variance;
  return c;
}

namespace {

CalibratedConfidence make_record(double raw, int correct, int layer,
                                 const PosteriorPrediction<double>& p, CalibrationResult& out) {
  auto c = corrected_confidence(raw, p.mean, p.variance);
  c.correct = correct;
  c.layer = layer;
  if (c.mean != c.mean_unclamped) ++out.mean_clamps;
  if (p.clamped) ++out.variance_clamps;
  return c;
}

}  // namespace

CalibrationResult calibrate(const Calibrator& calibrator, const FeatureDump& test,
                            CalibrationMode mode) {
  const auto& cfg = calibrator.config;
  const auto& model = calibrator.gp;
  const bool single = cfg.method == Method::single_gp;
  const auto n = static_cast<std::size_t>(test.size());

  CalibrationResult out;
  out.records.reserve(n);

  if (single || !mode.global) {
    const int layer = single ? cfg.layers.front() : mode.layer;
    if (!mode.global && single && mode.layer != layer)
      throw ArgumentError("single-gp model was trained on layer " + std::to_string(layer) +
                          ", cannot predict locally at layer " + std::to_string(mode.layer));
    if (std::find(cfg.layers.begin(), cfg.layers.end(), layer) == cfg.layers.end())
      throw ArgumentError("layer " + std::to_string(layer) + " is not among the model's layers");
    // pad to the model's width: build over the full selection, keep one layer
    auto all = build_samples(test, cfg.pooling, cfg.layers);
    const auto pos = static_cast<std::size_t>(
        std::find(cfg.layers.begin(), cfg.layers.end(), layer) - cfg.layers.begin());
    std::vector<Sample> queries(all.begin() + static_cast<std::ptrdiff_t>(pos * n),
                                all.begin() + static_cast<std::ptrdiff_t>((pos + 1) * n));
    calibrator.standardizer.apply_in_place(queries);
    const auto preds = predict_local_batch(model, std::span<const Sample>(queries));
    for (std::size_t i = 0; i < n; ++i)
      out.records.push_back(
          make_record(queries[i].confidence, queries[i].correctness, layer, preds[i], out));
    return out;
  }

  auto all = build_samples(test, cfg.pooling, cfg.layers);
  calibrator.standardizer.apply_in_place(all);
  const std::size_t l = cfg.layers.size();
  std::vector<VectorXd> inputs(l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < l; ++p) inputs[p] = all[p * n + i].features;
    const auto pred = predict_global_joint(model, std::span<const VectorXd>(inputs),
                                           all[i].confidence);
    out.records.push_back(make_record(all[i].confidence, all[i].correctness, kGlobalLayer, pred, out));
  }
  return out;
}

CalibrationResult identity_calibration(const FeatureDump& dump) {
  const auto conf = top1_confidence(dump);
  const auto correct = correctness(dump);
  CalibrationResult out;
  out.has_variance = false;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    CalibratedConfidence c;
    c.raw = c.mean = c.mean_unclamped = conf[static_cast<Eigen::Index>(i)];
    c.correct = correct[i];
    c.layer = kGlobalLayer;
    out.records.push_back(c);
  }
  return out;
}

MetricsReport metrics_for(const CalibrationResult& result, int bin_count) {
  std::vector<double> conf;
  std::vector<int> correct;
  double var = 0.0;
  for (const auto& r : result.records) {
    conf.push_back(r.mean);
    correct.push_back(r.correct);
    var += r.variance;
  }
  auto report = compute_metrics(conf, correct, bin_count);
  report.clamp_count = result.mean_clamps;
  if (result.has_variance) report.mean_variance = var / static_cast<double>(conf.size());
  return report;
}

MetricsReport uncalibrated_metrics(const FeatureDump& dump, const MatrixXd& probabilities,
                                   int bin_count) {
  std::vector<double> conf(static_cast<std::size_t>(probabilities.rows()));
  std::vector<int> correct(conf.size());
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index arg = 0;
    conf[static_cast<std::size_t>(i)] = probabilities.row(i).maxCoeff(&arg);
    correct[static_cast<std::size_t>(i)] =
        dump.labels[static_cast<std::size_t>(i)] == static_cast<int>(arg) ? 1 : 0;
  }
  auto report = compute_metrics(conf, correct, bin_count);
  report.nll_multiclass = nll_multiclass(probabilities, dump.labels);
  report.brier_multiclass = brier_multiclass(probabilities, dump.labels);
  return report;
}

}  // namespace salgp
