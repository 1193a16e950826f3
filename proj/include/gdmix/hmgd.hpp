#ifndef GDMIX_HMGD_HPP_
#define GDMIX_HMGD_HPP_

#include <utility>
#include <vector>

#include "gdmix/dgd.hpp"
#include "gdmix/types.hpp"

namespace gdmix {

// Two-level hierarchical mixture of DGD experts: a root gating over K
// regions, one inner gating per region over M_i sub-regions, and one expert
// classifier per leaf. M_i = 1 collapses a region to a single expert, so the
// flat one-level mixture is the all-ones inner structure.
struct HMGDTree {
  int levels = 2;
  int class_count = 0;
  double scale = 1.0;
  DGDModel root_gating;                      // K components
  std::vector<DGDModel> inner_gatings;       // per region, M_i components
  std::vector<std::vector<DGDModel>> experts; // per region, per sub-region

  int regions() const { return root_gating.class_count; }
  int subregions(int i) const { return inner_gatings[i].class_count; }

  std::vector<double> predict_proba_v(const std::vector<double>& v) const;
  std::vector<double> predict_proba(const CompositionalSample& sample) const;
  int predict(const CompositionalSample& sample) const;
};

// E-step responsibilities. h0 is N x K; h1[i] is N x M_i. The leaf path
// weight of (i, j) is h0[n][i] * h1[i][n][j].
struct Responsibilities {
  std::vector<std::vector<double>> h0;
  std::vector<std::vector<std::vector<double>>> h1;

  double path_weight(int n, int i, int j) const {
    return h0[n][i] * h1[i][n][j];
  }
};

struct HMGDStructure {
  int regions = 1;                 // K
  std::vector<int> subregions;     // M_i; uniform M when a single entry
};

struct HMGDReport {
  std::vector<double> objective_trace; // expected complete objective, fresh resp.
  std::vector<double> loglik_trace;    // sum_n ln p(y_n | x_n)
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

Responsibilities e_step(const HMGDTree& tree, const Dataset& data);

// Refits every node against fresh responsibilities: root gating on h0,
// inner gating i on h1[i] weighted by h0[:,i], expert (i,j) on the true
// labels weighted by the leaf path weight. Gating fits are capped at 5
// EM iterations and expert fits at 30.
void m_step(HMGDTree& tree, const Dataset& data, const Responsibilities& resp,
            const FitConfig& cfg, HMGDReport* report);

std::pair<HMGDTree, HMGDReport> fit_tree(const Dataset& data,
                                         const HMGDStructure& structure,
                                         const FitConfig& cfg);

// Removes gating branches whose mixing weight is below the threshold and
// renormalizes; no-op (with a warning) when all branches fall below it.
void prune(HMGDTree& tree, double threshold,
           std::vector<std::string>* warnings);

} // namespace gdmix

#endif // GDMIX_HMGD_HPP_
