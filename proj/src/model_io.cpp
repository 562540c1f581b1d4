#include "salgp/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace salgp {

using nlohmann::ordered_json;

namespace {

ordered_json vec(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd to_vec(const ordered_json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ordered_json sum_params(const SumKernelParams<double>& p) {
  return {{"feat_variance", p.feat_variance},
          {"feat_lengthscale", p.feat_lengthscale},
          {"conf_variance", p.conf_variance},
          {"conf_lengthscale", p.conf_lengthscale}};
}

SumKernelParams<double> to_sum_params(const ordered_json& j) {
  return {j.at("feat_variance").get<double>(), j.at("feat_lengthscale").get<double>(),
          j.at("conf_variance").get<double>(), j.at("conf_lengthscale").get<double>()};
}

}  // namespace

std::string serialize_model(const Calibrator& c) {
  const auto& cfg = c.config;
  const auto& gp = c.gp;
  ordered_json j;
  j["format"] = "salgp-model";
  j["version"] = kModelFormatVersion;
  j["config"] = {{"method", to_string(cfg.method)},
                 {"layers", cfg.layers},
                 {"pooling", to_string(cfg.pooling)},
                 {"base", to_string(cfg.base)},
                 {"iters", cfg.opt.iters},
                 {"learning_rate", cfg.opt.learning_rate},
                 {"seed", cfg.opt.seed},
                 {"min_lengthscale", cfg.opt.min_lengthscale}};
  j["kernel"] = {{"variant", to_string(gp.spec.variant)},
                 {"base", to_string(gp.spec.base)},
                 {"layers", gp.spec.layers},
                 {"icm_rank", gp.spec.icm_rank}};

  ordered_json hp;
  hp["base"] = sum_params(gp.hp.base);
  hp["layer"] = sum_params(gp.hp.layer);
  hp["global_weight"] = gp.hp.global_weight;
  hp["layer_variances"] = vec(gp.hp.layer_variances);
  ordered_json factor = ordered_json::array();
  for (Eigen::Index r = 0; r < gp.hp.icm_factor.rows(); ++r)
    factor.push_back(vec(gp.hp.icm_factor.row(r).transpose()));
  hp["icm_factor"] = factor;
  hp["icm_diag"] = vec(gp.hp.icm_diag);
  hp["noise"] = gp.hp.noise;
  j["hyperparameters"] = hp;

  j["standardizer"] = {{"mean", vec(c.standardizer.mean)}, {"scale", vec(c.standardizer.scale)}};

  ordered_json samples = ordered_json::array();
  for (const auto& s : gp.samples)
    samples.push_back({{"layer", s.layer_index},
                       {"confidence", s.confidence},
                       {"correct", s.correctness},
                       {"residual", s.residual},
                       {"features", vec(s.features)}});
  j["samples"] = samples;
  j["jitter"] = gp.jitter;
  j["training_log"] = gp.training_log;
  return j.dump(1) + "\n";
}

Calibrator deserialize_model(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "salgp-model")
      throw Error("not a salgp model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw Error("unsupported model version " + std::to_string(version));

    Calibrator c;
    const auto& cj = j.at("config");
    c.config.method = parse_method(cj.at("method").get<std::string>());
    c.config.layers = cj.at("layers").get<std::vector<int>>();
    c.config.pooling = parse_pooling(cj.at("pooling").get<std::string>());
    c.config.base = parse_base_kind(cj.at("base").get<std::string>());
    c.config.opt.iters = cj.at("iters").get<int>();
    c.config.opt.learning_rate = cj.at("learning_rate").get<double>();
    c.config.opt.seed = cj.at("seed").get<std::uint64_t>();
    c.config.opt.min_lengthscale = cj.value("min_lengthscale", 0.0);
    c.config.validate();

    KernelSpec spec;
    const auto& kj = j.at("kernel");
    spec.variant = parse_variant(kj.at("variant").get<std::string>());
    spec.base = parse_base_kind(kj.at("base").get<std::string>());
    spec.layers = kj.at("layers").get<std::vector<int>>();
    spec.icm_rank = kj.at("icm_rank").get<int>();
    spec.validate();

    const auto& hj = j.at("hyperparameters");
    auto hp = default_hyperparams<double>(spec);
    hp.base = to_sum_params(hj.at("base"));
    hp.layer = to_sum_params(hj.at("layer"));
    hp.global_weight = hj.at("global_weight").get<double>();
    hp.layer_variances = to_vec(hj.at("layer_variances"));
    const auto& fj = hj.at("icm_factor");
    if (!fj.empty()) {
      hp.icm_factor.resize(static_cast<Eigen::Index>(fj.size()),
                           static_cast<Eigen::Index>(fj.front().size()));
      for (std::size_t r = 0; r < fj.size(); ++r)
        hp.icm_factor.row(static_cast<Eigen::Index>(r)) = to_vec(fj[r]).transpose();
    }
    hp.icm_diag = to_vec(hj.at("icm_diag"));
    hp.noise = hj.at("noise").get<double>();

    c.standardizer.mean = to_vec(j.at("standardizer").at("mean"));
    c.standardizer.scale = to_vec(j.at("standardizer").at("scale"));

    std::vector<Sample> samples;
    for (const auto& sj : j.at("samples")) {
      Sample s;
      s.layer_index = sj.at("layer").get<int>();
      s.confidence = sj.at("confidence").get<double>();
      s.correctness = sj.at("correct").get<int>();
      s.residual = sj.at("residual").get<double>();
      s.features = to_vec(sj.at("features"));
      samples.push_back(std::move(s));
    }
    c.gp = GPModel<double>::condition(std::move(samples), spec, hp);
    c.gp.training_log = j.at("training_log").get<std::vector<double>>();
    return c;
  } catch (const ordered_json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const Calibrator& calibrator, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write model file " + path.string());
  out << serialize_model(calibrator);
  if (!out) throw Error("write failure: " + path.string());
}

Calibrator load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace salgp
