#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "gdmix/dgd.hpp"
#include "gdmix/eval.hpp"
#include "gdmix/hmgd.hpp"
#include "gdmix/io.hpp"
#include "gdmix/simplex.hpp"
#include "gdmix/types.hpp"

namespace {

struct CommonOpts {
  std::string data;
  std::string label;
  bool preprocess = false;
};

gdmix::Dataset load_dataset(const CommonOpts& opts) {
  const gdmix::LabeledTable table = gdmix::read_csv(opts.data, opts.label);
  if (opts.preprocess) {
    const int classes =
        table.labels.empty() ? 0 : static_cast<int>(table.label_names.size());
    gdmix::Dataset data =
        gdmix::preprocess_uci(table.rows, table.labels, classes);
    data.feature_names = table.columns;
    return data;
  }
  return gdmix::dataset_from_table(table);
}

void print_report(const gdmix::FitReport& report) {
  std::printf("iterations: %d, converged: %s\n", report.iterations,
              report.converged ? "yes" : "no");
  if (!report.phi_trace.empty()) {
    std::printf("final objective: %.6f\n", report.phi_trace.back());
  }
  for (const auto& w : report.warnings) std::printf("warning: %s\n", w.c_str());
}

int run_train(const CommonOpts& common, const std::string& model_kind,
              const std::string& out, int experts, int inner,
              const gdmix::FitConfig& cfg) {
  const gdmix::Dataset data = load_dataset(common);
  if (model_kind == "hmgd") {
    gdmix::HMGDStructure structure;
    structure.regions = experts;
    structure.subregions.assign(experts, inner);
    const auto fitted = gdmix::fit_tree(data, structure, cfg);
    gdmix::save_hmgd(fitted.first, out);
    std::printf("model: hmgd (K=%d, M=%d)\n", experts, inner);
    std::printf("iterations: %d, converged: %s\n", fitted.second.iterations,
                fitted.second.converged ? "yes" : "no");
    if (!fitted.second.loglik_trace.empty()) {
      std::printf("final log-likelihood: %.6f\n",
                  fitted.second.loglik_trace.back());
    }
    for (const auto& w : fitted.second.warnings) {
      std::printf("warning: %s\n", w.c_str());
    }
  } else {
    const auto fitted = model_kind == "mgd" ? gdmix::fit_generative(data, cfg)
                                            : gdmix::fit_labeled(data, cfg);
    gdmix::save_dgd(fitted.first, out);
    std::printf("model: %s\n", model_kind.c_str());
    print_report(fitted.second);
  }
  std::printf("saved: %s\n", out.c_str());
  return 0;
}

int run_predict(const CommonOpts& common, const std::string& model_path,
                const std::string& out) {
  const gdmix::Dataset data = load_dataset(common);
  const gdmix::LoadedModel model = gdmix::load_model(model_path);
  std::vector<std::vector<double>> rows;
  rows.reserve(data.samples.size());
  int correct = 0;
  int labeled = 0;
  for (const auto& s : data.samples) {
    const int y = model.kind == "hmgd" ? model.hmgd.predict(s)
                                       : model.dgd.predict(s);
    rows.push_back({static_cast<double>(y)});
    if (s.label) {
      ++labeled;
      correct += (*s.label == y) ? 1 : 0;
    }
  }
  gdmix::write_csv(out, {"predicted"}, rows, {});
  std::printf("predicted %zu rows -> %s\n", rows.size(), out.c_str());
  if (labeled > 0) {
    std::printf("accuracy: %.2f\n", 100.0 * correct / labeled);
  }
  return 0;
}

int run_evaluate(const CommonOpts& common, const std::string& model_kind,
                 int folds, int experts, int inner, const gdmix::FitConfig& cfg,
                 const std::string& json_out, double alpha_baseline,
                 const std::string& alpha_out) {
  const gdmix::Dataset data = load_dataset(common);
  if (alpha_baseline > 0.0) {
    // Emits the alpha-transformed dataset for external tooling.
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (const auto& s : data.samples) {
      rows.push_back(gdmix::alpha_transform(s.values, alpha_baseline));
      if (s.label) labels.push_back(std::to_string(*s.label));
    }
    std::vector<std::string> cols;
    for (std::size_t d = 0; d < rows.front().size(); ++d) {
      cols.push_back("z" + std::to_string(d));
    }
    gdmix::write_csv(alpha_out, cols, rows, labels);
    std::printf("alpha-transformed dataset (alpha=%g) -> %s\n", alpha_baseline,
                alpha_out.c_str());
  }
  gdmix::HMGDStructure structure;
  structure.regions = experts;
  structure.subregions.assign(experts, inner);
  const gdmix::ExperimentResult result = gdmix::run_experiment(
      data, gdmix::model_kind_from_string(model_kind), structure, cfg, folds);
  std::fputs(gdmix::summary_text(result).c_str(), stdout);
  if (!json_out.empty()) {
    gdmix::save_result(result, json_out);
    std::printf("result: %s\n", json_out.c_str());
  }
  return 0;
}

int run_synth(const std::string& out, int classes, int dim, int samples,
              std::uint64_t seed, double separation) {
  std::vector<gdmix::ClassSpec> specs(classes);
  for (int c = 0; c < classes; ++c) {
    specs[c].prior = 1.0 / classes;
    specs[c].params.scale = 1.0;
    specs[c].params.shapes.resize(dim);
    for (int d = 0; d < dim; ++d) {
      if ((c + d) % classes == 0) {
        specs[c].params.shapes[d] = {separation, 2.0};
      } else {
        specs[c].params.shapes[d] = {2.0, separation};
      }
    }
  }
  const gdmix::Dataset data = gdmix::synth_gd(specs, samples, seed);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  for (const auto& s : data.samples) {
    rows.push_back(s.values);
    labels.push_back(std::to_string(*s.label));
  }
  std::vector<std::string> cols;
  for (int d = 0; d <= dim; ++d) cols.push_back("x" + std::to_string(d));
  gdmix::write_csv(out, cols, rows, labels);
  std::printf("wrote %d samples -> %s\n", samples, out.c_str());
  return 0;
}

int run_transform(const CommonOpts& common, const std::string& mode,
                  double alpha, const std::string& out) {
  const gdmix::LabeledTable table = gdmix::read_csv(common.data, common.label);
  std::vector<std::string> labels;
  for (int y : table.labels) labels.push_back(std::to_string(y));
  if (mode == "alpha") {
    std::vector<std::vector<double>> rows;
    for (const auto& raw : table.rows) {
      const gdmix::CompositionalSample s = gdmix::zero_replace(raw, 1.0);
      rows.push_back(gdmix::alpha_transform(s.values, alpha));
    }
    std::vector<std::string> cols;
    for (std::size_t d = 0; d < rows.front().size(); ++d) {
      cols.push_back("z" + std::to_string(d));
    }
    gdmix::write_csv(out, cols, rows, labels);
  } else { // uci
    const int classes =
        table.labels.empty() ? 0 : static_cast<int>(table.label_names.size());
    const gdmix::Dataset data =
        gdmix::preprocess_uci(table.rows, table.labels, classes);
    std::vector<std::vector<double>> rows;
    for (const auto& s : data.samples) rows.push_back(s.values);
    std::vector<std::string> cols;
    for (std::size_t d = 0; d < rows.front().size(); ++d) {
      cols.push_back("x" + std::to_string(d));
    }
    gdmix::write_csv(out, cols, rows, labels);
  }
  std::printf("wrote %zu rows -> %s\n", table.rows.size(), out.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"gdmix: compositional data classifiers built on the scaled "
               "Generalized Dirichlet (DGD, MGD, HMGD)"};
  app.require_subcommand(1);

  CommonOpts common;
  gdmix::FitConfig cfg;
  std::string model_kind = "dgd";
  std::string out;
  std::string model_path;
  std::string json_out;
  std::string alpha_out = "alpha_baseline.csv";
  std::string mode = "alpha";
  int experts = 2;
  int inner = 1;
  int folds = 5;
  int classes = 2;
  int dim = 3;
  int samples = 500;
  double alpha = 1.0;
  double alpha_baseline = 0.0;
  double separation = 8.0;

  CLI::App* train = app.add_subcommand("train", "fit a model and save it");
  train->add_option("--data", common.data, "input CSV")->required();
  train->add_option("--label", common.label, "label column (name or index)")
      ->required();
  train->add_option("--model", model_kind, "dgd | mgd | hmgd")
      ->check(CLI::IsMember({"dgd", "mgd", "hmgd"}));
  train->add_option("--experts", experts, "HMGD regions K");
  train->add_option("--inner", inner, "HMGD sub-regions per region M");
  train->add_option("--out", out, "model output path")->required();
  train->add_option("--tol", cfg.tol, "EM convergence tolerance");
  train->add_option("--max-iter", cfg.max_iter, "EM iteration cap");
  train->add_option("--seed", cfg.seed, "RNG seed");
  train->add_flag("--preprocess-uci", common.preprocess,
                  "apply the UCI preprocessing pipeline");

  CLI::App* predict = app.add_subcommand("predict", "classify rows with a model");
  predict->add_option("--data", common.data, "input CSV")->required();
  predict->add_option("--label", common.label,
                      "label column (optional, reports accuracy)");
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--out", out, "predictions CSV")->required();
  predict->add_flag("--preprocess-uci", common.preprocess,
                    "apply the UCI preprocessing pipeline");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "stratified cross-validation");
  evaluate->add_option("--data", common.data, "input CSV")->required();
  evaluate->add_option("--label", common.label, "label column")->required();
  evaluate->add_option("--model-kind", model_kind, "dgd | mgd | hmgd")
      ->check(CLI::IsMember({"dgd", "mgd", "hmgd"}));
  evaluate->add_option("--folds", folds, "number of folds");
  evaluate->add_option("--experts", experts, "HMGD regions K");
  evaluate->add_option("--inner", inner, "HMGD sub-regions per region M");
  evaluate->add_option("--tol", cfg.tol, "EM convergence tolerance");
  evaluate->add_option("--max-iter", cfg.max_iter, "EM iteration cap");
  evaluate->add_option("--seed", cfg.seed, "fold/RNG seed");
  evaluate->add_option("--json", json_out, "write the result document here");
  evaluate->add_option("--alpha-baseline", alpha_baseline,
                       "emit the alpha-transformed dataset for external tools");
  evaluate->add_option("--alpha-out", alpha_out,
                       "path for the alpha-transformed dataset");
  evaluate->add_flag("--preprocess-uci", common.preprocess,
                     "apply the UCI preprocessing pipeline");

  CLI::App* synth = app.add_subcommand("synth", "draw a labeled GD dataset");
  synth->add_option("--out", out, "output CSV")->required();
  synth->add_option("--classes", classes, "number of classes");
  synth->add_option("--dim", dim, "D (samples have D+1 parts)");
  synth->add_option("--samples", samples, "number of samples");
  synth->add_option("--seed", cfg.seed, "RNG seed");
  synth->add_option("--separation", separation, "shape contrast between classes");

  CLI::App* transform =
      app.add_subcommand("transform", "alpha-transform or UCI preprocessing");
  transform->add_option("--data", common.data, "input CSV")->required();
  transform->add_option("--label", common.label, "label column (optional)");
  transform->add_option("--mode", mode, "alpha | uci")
      ->check(CLI::IsMember({"alpha", "uci"}));
  transform->add_option("--alpha", alpha, "alpha for the transformation");
  transform->add_option("--out", out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e); // --help
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (!(cfg.tol > 0.0)) {
      std::cerr << "--tol must be positive\n";
      return 2;
    }
    if (cfg.max_iter < 1) {
      std::cerr << "--max-iter must be at least 1\n";
      return 2;
    }
    if (train->parsed()) {
      return run_train(common, model_kind, out, experts, inner, cfg);
    }
    if (predict->parsed()) {
      return run_predict(common, model_path, out);
    }
    if (evaluate->parsed()) {
      return run_evaluate(common, model_kind, folds, experts, inner, cfg,
                          json_out, alpha_baseline, alpha_out);
    }
    if (synth->parsed()) {
      return run_synth(out, classes, dim, samples, cfg.seed, separation);
    }
    if (transform->parsed()) {
      return run_transform(common, mode, alpha, out);
    }
  } catch (const gdmix::NonFiniteObjective& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const gdmix::SingularBlock& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const gdmix::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
