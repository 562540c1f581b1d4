#include "salgp/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "salgp/model_io.hpp"

namespace salgp::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failure: " + path.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

std::vector<PoolingMode> parse_pooling_list(const std::string& text) {
  if (text == "both") return {PoolingMode::max, PoolingMode::avg};
  return {parse_pooling(text)};
}

}  // namespace

double cmd_train(const TrainOptions& o) {
  CalibratorConfig cfg;
  cfg.method = parse_method(o.method);
  if (cfg.method == Method::single_gp) {
    if (o.layer < 1) throw ArgumentError("single-gp needs --layer");
    cfg.layers = {o.layer};
  } else {
    if (o.layers.empty()) throw ArgumentError(to_string(cfg.method) + " needs --layers");
    cfg.layers = parse_layer_list(o.layers);
  }
  cfg.pooling = parse_pooling(o.pooling);
  cfg.base = parse_base_kind(o.base);
  cfg.opt.iters = o.iters;
  cfg.opt.learning_rate = o.learning_rate;
  cfg.opt.seed = o.seed;
  cfg.validate();

  const auto dump = load_dump(o.dump);
  const auto calibrator = train_calibrator(dump, cfg);
  save_model(calibrator, o.out);
  return calibrator.gp.training_log.back();
}

MetricsReport cmd_evaluate(const EvaluateOptions& o) {
  const auto format = parse_table_format(o.format);
  const auto dump = load_dump(o.dump);
  CalibrationResult result;
  if (o.model) {
    const auto calibrator = load_model(*o.model);
    result = calibrate(calibrator, dump, CalibrationMode::parse(o.mode));
  } else {
    result = identity_calibration(dump);
  }
  const auto report = metrics_for(result, o.bins);
  std::vector<double> conf;
  std::vector<int> correct;
  for (const auto& r : result.records) {
    conf.push_back(r.mean);
    correct.push_back(r.correct);
  }
  const auto diagram = reliability(conf, correct, o.bins);

  write_text(o.out_dir / "metrics.txt", to_record(report));
  write_text(o.out_dir / ("reliability" + extension(format)), reliability_table(diagram).render(format));
  write_text(o.out_dir / ("residuals" + extension(format)), residual_table(result).render(format));
  write_text(o.out_dir / ("calibrated" + extension(format)), calibrated_table(result).render(format));
  return report;
}

void cmd_calibrate(const CalibrateOptions& o) {
  const auto format = parse_table_format(o.format);
  const auto calibrator = load_model(o.model);
  const auto dump = load_dump(o.dump);
  const auto result = calibrate(calibrator, dump, CalibrationMode::parse(o.mode));
  write_text(o.out, calibrated_table(result).render(format));
}

Table cmd_compare(const CompareOptions& o) {
  const auto format = parse_table_format(o.format);
  const auto train = load_dump(o.train);
  const auto test = load_dump(o.test);
  const auto layers = parse_layer_list(o.layers);
  const auto poolings = parse_pooling_list(o.pooling);
  const auto base = parse_base_kind(o.base);
  const auto methods = split_list(o.methods);
  auto wants = [&](const std::string& m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
  };
  for (const auto& m : methods)
    if (m != "uncalibrated" && m != "temperature" && m != "single-gp" && m != "sal-ml" &&
        m != "sal-hl")
      throw ArgumentError("unknown method '" + m + "' in --methods");

  Table table{{"pooling", "method", "ece", "mce", "nll_top1", "brier_top1", "nll_multiclass",
               "brier_multiclass", "mean_variance", "accuracy", "clamp_count"},
              {}};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto add_row = [&](const std::string& pooling, const std::string& name,
                     const MetricsReport& r, const ReliabilityDiagram& d) {
    table.add({pooling, name, r.ece, r.mce, r.nll, r.brier, r.nll_multiclass.value_or(nan),
               r.brier_multiclass.value_or(nan), r.mean_variance.value_or(nan), r.accuracy,
               static_cast<std::int64_t>(r.clamp_count)});
    std::string file = pooling + "_" + name;
    std::replace(file.begin(), file.end(), ' ', '_');
    write_text(o.out_dir / "reliability" / (file + extension(format)),
               reliability_table(d).render(format));
  };
  auto diagram_of = [&](const CalibrationResult& res) {
    std::vector<double> conf;
    std::vector<int> correct;
    for (const auto& r : res.records) {
      conf.push_back(r.mean);
      correct.push_back(r.correct);
    }
    return reliability(conf, correct, o.bins);
  };
  auto probs_diagram = [&](const MatrixXd& probs) {
    std::vector<double> conf(static_cast<std::size_t>(probs.rows()));
    std::vector<int> correct(conf.size());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Eigen::Index arg = 0;
      conf[static_cast<std::size_t>(i)] = probs.row(i).maxCoeff(&arg);
      correct[static_cast<std::size_t>(i)] = test.labels[static_cast<std::size_t>(i)] == arg;
    }
    return reliability(conf, correct, o.bins);
  };

  if (wants("uncalibrated"))
    add_row("-", "uncalibrated", uncalibrated_metrics(test, test.softmax, o.bins),
            probs_diagram(test.softmax));
  if (wants("temperature")) {
    const auto val = o.validation ? load_dump(*o.validation) : train;
    bool recovered = false;
    const auto val_logits = dump_logits(val, &recovered);
    const auto test_logits = dump_logits(test, &recovered);
    if (recovered)
      std::cerr << "warning: logits.f32 missing, using log-softmax for temperature scaling\n";
    TemperatureOptions topt;
    topt.init_temperature = o.temperature_init;
    topt.iters = o.temperature_iters;
    const auto tm = fit_temperature(val_logits, val.labels, topt);
    const auto probs = apply_temperature(test_logits, tm.temperature);
    add_row("-", "temperature", uncalibrated_metrics(test, probs, o.bins), probs_diagram(probs));
    write_text(o.out_dir / "temperature.txt", "temperature=" + format_real(tm.temperature) + "\n");
  }

  for (const auto pooling : poolings) {
    const auto pname = to_string(pooling);
    CalibratorConfig cfg;
    cfg.pooling = pooling;
    cfg.base = base;
    cfg.opt.iters = o.iters;
    cfg.opt.learning_rate = o.learning_rate;
    cfg.opt.seed = o.seed;
    if (wants("single-gp")) {
      for (int l : layers) {
        cfg.method = Method::single_gp;
        cfg.layers = {l};
        const auto c = train_calibrator(train, cfg);
        const auto res = calibrate(c, test, CalibrationMode{true, 0});
        add_row(pname, "single-gp L" + std::to_string(l), metrics_for(res, o.bins), diagram_of(res));
      }
    }
    for (const auto method : {Method::sal_ml, Method::sal_hl}) {
      if (!wants(to_string(method))) continue;
      cfg.method = method;
      cfg.layers = layers;
      const auto c = train_calibrator(train, cfg);
      const auto g = calibrate(c, test, CalibrationMode{true, 0});
      add_row(pname, to_string(method) + " G", metrics_for(g, o.bins), diagram_of(g));
      for (int l : layers) {
        const auto res = calibrate(c, test, CalibrationMode{false, l});
        add_row(pname, to_string(method) + " L" + std::to_string(l), metrics_for(res, o.bins),
                diagram_of(res));
      }
    }
  }
  write_text(o.out_dir / ("comparison" + extension(format)), table.render(format));
  return table;
}

void cmd_synth(const SynthOptions& o) { generate(o.spec, o.out); }

int run(int argc, char** argv) {
  CLI::App app{"Post-hoc confidence calibration with layerwise Gaussian-process residual models"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Re-run from an echoed configuration file");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Fit a residual GP calibrator on a dump")->configurable();
  t->add_option("--dump", train.dump, "Training dump directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", train.out, "Model archive to write")->capture_default_str();
  t->add_option("--method", train.method, "single-gp | sal-ml | sal-hl")->capture_default_str();
  t->add_option("--layers", train.layers, "Layer selection for SAL methods, e.g. 1-5");
  t->add_option("--layer", train.layer, "Layer for single-gp");
  t->add_option("--pooling", train.pooling, "max | avg")->capture_default_str();
  t->add_option("--kernel", train.base, "rbf | matern25")->capture_default_str();
  t->add_option("--iters", train.iters)->capture_default_str();
  t->add_option("--lr", train.learning_rate)->capture_default_str();
  t->add_option("--seed", train.seed)->capture_default_str();

  EvaluateOptions eval;
  std::string eval_model;
  auto* e = app.add_subcommand("evaluate", "Metrics, reliability and residual tables")->configurable();
  e->add_option("--model", eval_model, "Model archive (omit for the uncalibrated report)");
  e->add_option("--dump", eval.dump, "Test dump directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--mode", eval.mode, "global | local:<layer>")->capture_default_str();
  e->add_option("--out-dir", eval.out_dir)->capture_default_str();
  e->add_option("--format", eval.format, "tsv | jsonlines")->capture_default_str();
  e->add_option("--bins", eval.bins)->capture_default_str()->check(CLI::PositiveNumber);

  CalibrateOptions cal;
  auto* c = app.add_subcommand("calibrate", "Write calibrated confidences for a dump")->configurable();
  c->add_option("--model", cal.model)->required()->check(CLI::ExistingFile);
  c->add_option("--dump", cal.dump)->required()->check(CLI::ExistingDirectory);
  c->add_option("--mode", cal.mode, "global | local:<layer>")->capture_default_str();
  c->add_option("--out", cal.out)->capture_default_str();
  c->add_option("--format", cal.format, "tsv | jsonlines")->capture_default_str();

  CompareOptions cmp;
  std::string cmp_val;
  auto* m = app.add_subcommand("compare", "Every method on one train/test pair")->configurable();
  m->add_option("--train", cmp.train)->required()->check(CLI::ExistingDirectory);
  m->add_option("--test", cmp.test)->required()->check(CLI::ExistingDirectory);
  m->add_option("--val", cmp_val, "Validation dump for temperature scaling (default: train)");
  m->add_option("--layers", cmp.layers)->capture_default_str();
  m->add_option("--pooling", cmp.pooling, "max | avg | both")->capture_default_str();
  m->add_option("--methods", cmp.methods)->capture_default_str();
  m->add_option("--kernel", cmp.base, "rbf | matern25")->capture_default_str();
  m->add_option("--iters", cmp.iters)->capture_default_str();
  m->add_option("--lr", cmp.learning_rate)->capture_default_str();
  m->add_option("--seed", cmp.seed)->capture_default_str();
  m->add_option("--temp-init", cmp.temperature_init)->capture_default_str();
  m->add_option("--temp-iters", cmp.temperature_iters)->capture_default_str();
  m->add_option("--bins", cmp.bins)->capture_default_str()->check(CLI::PositiveNumber);
  m->add_option("--out-dir", cmp.out_dir)->capture_default_str();
  m->add_option("--format", cmp.format, "tsv | jsonlines")->capture_default_str();

  SynthOptions syn;
  auto* s = app.add_subcommand("synth", "Generate a synthetic train/test dump pair")->configurable();
  s->add_option("--out", syn.out)->capture_default_str();
  s->add_option("--n-train", syn.spec.n_train)->capture_default_str();
  s->add_option("--n-test", syn.spec.n_test)->capture_default_str();
  s->add_option("--classes", syn.spec.k_classes)->capture_default_str();
  s->add_option("--layer-dims", syn.spec.layer_dims)->delimiter(',')->capture_default_str();
  s->add_option("--bias", syn.spec.overconfidence_bias)->capture_default_str();
  s->add_option("--label-noise", syn.spec.label_noise)->capture_default_str();
  s->add_option("--channels", syn.spec.channels)->capture_default_str();
  s->add_option("--separation", syn.spec.separation)->capture_default_str();
  s->add_option("--seed", syn.spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
  Eigen::setNbThreads(threads);

  // Echo only the selected subcommand; unset options carry no value.
  std::string echo;
  for (const CLI::App* sub : app.get_subcommands()) {
    echo += '[' + sub->get_name() + "]\n";
    std::istringstream lines(sub->config_to_str(true, false));
    for (std::string line; std::getline(lines, line);)
      if (!line.ends_with("=\"\"")) echo += line + '\n';
  }
  try {
    if (t->parsed()) {
      const double lml = cmd_train(train);
      write_text(fs::path(train.out.string() + ".config.toml"), echo);
      std::cout << "final log marginal likelihood: " << format_real(lml) << '\n';
    } else if (e->parsed()) {
      if (!eval_model.empty()) eval.model = eval_model;
      const auto report = cmd_evaluate(eval);
      write_text(eval.out_dir / "config.toml", echo);
      std::cout << to_record(report);
    } else if (c->parsed()) {
      cmd_calibrate(cal);
      write_text(fs::path(cal.out.string() + ".config.toml"), echo);
    } else if (m->parsed()) {
      if (!cmp_val.empty()) cmp.validation = cmp_val;
      const auto table = cmd_compare(cmp);
      write_text(cmp.out_dir / "config.toml", echo);
      std::cout << table.render(TableFormat::tsv);
    } else if (s->parsed()) {
      cmd_synth(syn);
      write_text(syn.out / "config.toml", echo);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace salgp::cli
