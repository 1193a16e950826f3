#ifndef GDMIX_DGD_HPP_
#define GDMIX_DGD_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gdmix/bound.hpp"
#include "gdmix/gd.hpp"
#include "gdmix/types.hpp"

namespace gdmix {

// Discriminative Generalized Dirichlet classifier: mixing weights over
// classes plus one GD per class; the classifier is the mixture posterior.
struct DGDModel {
  int class_count = 0;
  std::vector<double> alphas;
  std::vector<GDParams> gds;
  double scale = 1.0;

  std::vector<double> posterior_v(const std::vector<double>& v) const;
  std::vector<double> log_posterior_v(const std::vector<double>& v) const;
  std::vector<double> posterior(const CompositionalSample& sample) const;
  int predict_v(const std::vector<double>& v) const;
  int predict(const CompositionalSample& sample) const;
};

struct FitConfig {
  double tol = 1e-4;          // relative change of the objective
  int max_iter = 50;
  int newton_inner_iters = 1; // Newton sweeps per M-step
  double min_alpha = 1e-3;
  std::uint64_t seed = 0;
  bool zero_variational = false; // W = xddot = 0: generative (MGD) fitting
};

struct FitReport {
  std::vector<double> objective_trace; // lower bound Phi_1 after each M-step
  std::vector<double> phi_trace;       // convergence objective per iteration
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Per-dimension weighted sums feeding one Newton update. t_* aggregate
// H_n h_nj and H_n W_nj; s_* aggregate the matching (ln v, ln(A-v)) and
// variational-point pairs.
struct DimStats {
  double t_label = 0.0;
  double t_var = 0.0;
  std::array<double, 2> s_label{0.0, 0.0};
  std::array<double, 2> s_var{0.0, 0.0};
};

// Per-dimension piece of the lower bound and its derivatives in
// xi = (ln a, ln b).
double dim_objective(const DimStats& st, double a, double b, double scale);
std::array<double, 2> dim_gradient_xi(const DimStats& st, double a, double b,
                                      double scale);
Eigen::Matrix2d dim_hessian_xi(const DimStats& st, double a, double b,
                               double scale);

struct NewtonOutcome {
  double a = 0.0;
  double b = 0.0;
  bool rejected = false; // all halvings failed; parameters unchanged
  int halvings = 0;
};

// One safeguarded Newton update of a shape pair: full step, halved up to 10
// times while the objective decreases or exp(xi) leaves the shape box.
NewtonOutcome newton_step(const DimStats& st, double a, double b, double scale);

// Closed-form mixing-weight update. label_mass[j] = sum_n H_n h_nj,
// var_mass[j] = sum_{n,k} H_n W_nk xddot_{nk, 2D+j} (j < C-1),
// total = sum_n H_n, var_total = sum_{n,k} H_n W_nk.
std::vector<double> update_alphas(const std::vector<double>& label_mass,
                                  const std::vector<double>& var_mass,
                                  double total, double var_total,
                                  double min_alpha,
                                  std::vector<std::string>* warnings);

// Weighted discriminative fit: targets is an N x C row-stochastic matrix of
// hard or soft labels, weights an optional per-sample nonnegative vector.
// warm_start, when given, replaces the moment-method initialization.
std::pair<DGDModel, FitReport> fit(const Dataset& data,
                                   const std::vector<std::vector<double>>& targets,
                                   const std::vector<double>& weights,
                                   const FitConfig& cfg,
                                   const DGDModel* warm_start = nullptr);

// Fit from the dataset's own hard labels.
std::pair<DGDModel, FitReport> fit_labeled(const Dataset& data,
                                           const FitConfig& cfg);

// Generative (MGD) counterpart: per-class maximum likelihood through the
// same machinery with the variational parameters forced to zero.
std::pair<DGDModel, FitReport> fit_generative(const Dataset& data,
                                              const FitConfig& cfg);

// One-hot rows for hard labels.
std::vector<std::vector<double>> one_hot_targets(const Dataset& data);

} // namespace gdmix

#endif // GDMIX_DGD_HPP_
