#include "gdmix/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

namespace gdmix {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) {
    for (std::int64_t c : row) t += c;
  }
  return t;
}

ConfusionMatrix ConfusionMatrix::zeros(int classes) {
  ConfusionMatrix cm;
  cm.counts.assign(classes, std::vector<std::int64_t>(classes, 0));
  return cm;
}

CVPlan stratified_kfold(const std::vector<int>& labels, int class_count,
                        int folds, std::uint64_t seed) {
  if (folds < 2) throw OutOfRange("need at least two folds");
  std::vector<std::vector<int>> by_class(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw OutOfRange("label out of range at row " + std::to_string(i));
    }
    by_class[labels[i]].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < class_count; ++c) {
    if (static_cast<int>(by_class[c].size()) < folds) {
      throw ClassTooSmall("class " + std::to_string(c) + " has " +
                          std::to_string(by_class[c].size()) +
                          " members, needs >= " + std::to_string(folds));
    }
  }
  CVPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.fold_indices.assign(folds, {});
  for (int c = 0; c < class_count; ++c) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (c + 1));
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    for (std::size_t i = 0; i < by_class[c].size(); ++i) {
      plan.fold_indices[i % folds].push_back(by_class[c][i]);
    }
  }
  for (auto& fold : plan.fold_indices) std::sort(fold.begin(), fold.end());
  return plan;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t t = cm.total();
  if (t == 0) throw EmptyMatrix("empty confusion matrix");
  std::int64_t diag = 0;
  for (int c = 0; c < cm.classes(); ++c) diag += cm.counts[c][c];
  return static_cast<double>(diag) / static_cast<double>(t);
}

double mcc(const ConfusionMatrix& cm, bool* degenerate) {
  const std::int64_t total = cm.total();
  if (total == 0) throw EmptyMatrix("empty confusion matrix");
  if (degenerate != nullptr) *degenerate = false;
  const int k = cm.classes();
  const double s = static_cast<double>(total);
  double trace = 0.0;
  std::vector<double> t_true(k, 0.0);
  std::vector<double> p_pred(k, 0.0);
  for (int i = 0; i < k; ++i) {
    trace += static_cast<double>(cm.counts[i][i]);
    for (int j = 0; j < k; ++j) {
      t_true[i] += static_cast<double>(cm.counts[i][j]);
      p_pred[j] += static_cast<double>(cm.counts[i][j]);
    }
  }
  double pt = 0.0;
  double pp = 0.0;
  double tt = 0.0;
  for (int i = 0; i < k; ++i) {
    pt += p_pred[i] * t_true[i];
    pp += p_pred[i] * p_pred[i];
    tt += t_true[i] * t_true[i];
  }
  const double denom2 = (s * s - pp) * (s * s - tt);
  if (denom2 <= 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  return (trace * s - pt) / std::sqrt(denom2);
}

Dataset synth_gd(const std::vector<ClassSpec>& specs, int n,
                 std::uint64_t seed) {
  if (specs.empty()) throw OutOfRange("need at least one class spec");
  double prior_sum = 0.0;
  for (const auto& s : specs) {
    if (s.prior < 0.0) throw OutOfRange("negative prior");
    prior_sum += s.prior;
  }
  if (!(prior_sum > 0.0)) throw OutOfRange("priors sum to zero");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset out;
  out.class_count = static_cast<int>(specs.size());
  out.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    double u = unif(rng) * prior_sum;
    int cls = 0;
    for (std::size_t c = 0; c < specs.size(); ++c) {
      u -= specs[c].prior;
      if (u < 0.0) {
        cls = static_cast<int>(c);
        break;
      }
      cls = static_cast<int>(c);
    }
    CompositionalSample s = sample(specs[cls].params, rng);
    s.label = cls;
    out.samples.push_back(std::move(s));
  }
  out.check_consistent();
  return out;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDgd: return "dgd";
    case ModelKind::kMgd: return "mgd";
    case ModelKind::kHmgd: return "hmgd";
  }
  return "dgd";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "dgd") return ModelKind::kDgd;
  if (name == "mgd") return ModelKind::kMgd;
  if (name == "hmgd") return ModelKind::kHmgd;
  throw OutOfRange("unknown model kind: " + name);
}

namespace {

void mean_sd(const std::vector<double>& xs, double* mean, double* sd) {
  const double n = static_cast<double>(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  *mean = m;
  *sd = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
}

} // namespace

ExperimentResult run_experiment(const Dataset& data, ModelKind kind,
                                const HMGDStructure& structure,
                                const FitConfig& cfg, int folds) {
  data.check_consistent();
  std::vector<int> labels(data.size());
  for (int i = 0; i < data.size(); ++i) {
    if (!data.samples[i].label) throw NoEffectiveData("unlabeled sample");
    labels[i] = *data.samples[i].label;
  }
  const auto started = std::chrono::steady_clock::now();
  const CVPlan plan = stratified_kfold(labels, data.class_count, folds, cfg.seed);

  ExperimentResult result;
  result.kind = kind;
  result.folds = folds;
  result.seed = cfg.seed;
  result.structure = structure;
  for (int f = 0; f < folds; ++f) {
    Dataset train;
    Dataset test;
    train.class_count = test.class_count = data.class_count;
    std::vector<char> in_test(data.size(), 0);
    for (int idx : plan.fold_indices[f]) in_test[idx] = 1;
    for (int i = 0; i < data.size(); ++i) {
      (in_test[i] ? test : train).samples.push_back(data.samples[i]);
    }
    ConfusionMatrix cm = ConfusionMatrix::zeros(data.class_count);
    if (kind == ModelKind::kHmgd) {
      const HMGDTree tree = fit_tree(train, structure, cfg).first;
      for (const auto& s : test.samples) cm.add(*s.label, tree.predict(s));
    } else {
      const auto fitted = kind == ModelKind::kMgd ? fit_generative(train, cfg)
                                                  : fit_labeled(train, cfg);
      for (const auto& s : test.samples) cm.add(*s.label, fitted.first.predict(s));
    }
    result.fold_accuracy.push_back(accuracy(cm));
    result.fold_mcc.push_back(mcc(cm));
  }
  mean_sd(result.fold_accuracy, &result.accuracy_mean, &result.accuracy_sd);
  mean_sd(result.fold_mcc, &result.mcc_mean, &result.mcc_sd);
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return result;
}

std::string summary_text(const ExperimentResult& result) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "accuracy: %.2f +- %.2f\n",
                100.0 * result.accuracy_mean, 100.0 * result.accuracy_sd);
  out += buf;
  std::snprintf(buf, sizeof(buf), "mcc: %.4f +- %.4f\n", result.mcc_mean,
                result.mcc_sd);
  out += buf;
  return out;
}

} // namespace gdmix
