#ifndef GDMIX_EVAL_HPP_
#define GDMIX_EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "gdmix/gd.hpp"
#include "gdmix/hmgd.hpp"
#include "gdmix/types.hpp"

namespace gdmix {

// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::vector<std::vector<std::int64_t>> counts;

  int classes() const { return static_cast<int>(counts.size()); }
  std::int64_t total() const;
  void add(int truth, int predicted) { counts[truth][predicted] += 1; }
  static ConfusionMatrix zeros(int classes);
};

struct CVPlan {
  int folds = 5;
  std::vector<std::vector<int>> fold_indices;
  std::uint64_t seed = 0;
};

// Shuffles each class's indices and deals them round-robin, so per-class
// fold counts differ by at most one. Throws ClassTooSmall when a class has
// fewer members than folds.
CVPlan stratified_kfold(const std::vector<int>& labels, int class_count,
                        int folds, std::uint64_t seed);

double accuracy(const ConfusionMatrix& cm);

// Multiclass Matthews correlation (the R_K statistic); 0 when a denominator
// factor vanishes. degenerate, when given, reports that case.
double mcc(const ConfusionMatrix& cm, bool* degenerate = nullptr);

struct ClassSpec {
  GDParams params;
  double prior = 0.0;
};

// Labeled draws from class-conditional GDs with categorical priors.
Dataset synth_gd(const std::vector<ClassSpec>& specs, int n,
                 std::uint64_t seed);

enum class ModelKind { kDgd, kMgd, kHmgd };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ExperimentResult {
  ModelKind kind = ModelKind::kDgd;
  int folds = 5;
  std::uint64_t seed = 0;
  HMGDStructure structure; // used when kind == kHmgd
  std::vector<double> fold_accuracy;
  std::vector<double> fold_mcc;
  double accuracy_mean = 0.0;
  double accuracy_sd = 0.0;
  double mcc_mean = 0.0;
  double mcc_sd = 0.0;
  double wall_clock_seconds = 0.0;
};

// Stratified k-fold train/test of one model kind over the dataset.
ExperimentResult run_experiment(const Dataset& data, ModelKind kind,
                                const HMGDStructure& structure,
                                const FitConfig& cfg, int folds);

// Two-line Table-style summary (deterministic; no timing).
std::string summary_text(const ExperimentResult& result);

} // namespace gdmix

#endif // GDMIX_EVAL_HPP_
