#include "gdmix/dgd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gdmix/parallel.hpp"
#include "gdmix/simplex.hpp"

namespace gdmix {

namespace {

double beta_log_norm(double a, double b, double log_scale) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b) +
         (a + b - 1.0) * log_scale;
}

// alpha-dependent part of the lower bound, used to guard the closed-form
// mixing-weight update against clamping regressions.
double alpha_objective(const std::vector<double>& alphas,
                       const std::vector<double>& label_mass,
                       const std::vector<double>& var_mass, double var_total) {
  const int c = static_cast<int>(alphas.size());
  double f = 0.0;
  for (int j = 0; j < c; ++j) f += label_mass[j] * std::log(alphas[j]);
  for (int j = 0; j + 1 < c; ++j) {
    f += var_mass[j] * (std::log(alphas[j]) - std::log(alphas[c - 1]));
  }
  f += var_total * std::log(alphas[c - 1]);
  return f;
}

} // namespace

std::vector<double> DGDModel::log_posterior_v(const std::vector<double>& v) const {
  std::vector<double> logp(class_count);
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < class_count; ++c) {
    logp[c] = (alphas[c] > 0.0 ? std::log(alphas[c])
                               : -std::numeric_limits<double>::infinity()) +
              log_density_v(gds[c], v);
    top = std::max(top, logp[c]);
  }
  double sum = 0.0;
  for (int c = 0; c < class_count; ++c) sum += std::exp(logp[c] - top);
  const double logmix = top + std::log(sum);
  for (double& l : logp) l -= logmix;
  return logp;
}

std::vector<double> DGDModel::posterior_v(const std::vector<double>& v) const {
  std::vector<double> post = log_posterior_v(v);
  double sum = 0.0;
  for (double& p : post) {
    p = std::exp(p);
    sum += p;
  }
  for (double& p : post) p /= sum;
  return post;
}

std::vector<double> DGDModel::posterior(const CompositionalSample& sample) const {
  if (sample.dim() != gds.front().dim() || sample.scale != scale) {
    throw DimensionMismatch("sample does not match model dimensions");
  }
  return posterior_v(v_transform(sample).v);
}

int DGDModel::predict_v(const std::vector<double>& v) const {
  const std::vector<double> post = posterior_v(v);
  int best = 0;
  for (int c = 1; c < class_count; ++c) {
    if (post[c] > post[best]) best = c; // ties stay with the lowest index
  }
  return best;
}

int DGDModel::predict(const CompositionalSample& sample) const {
  if (sample.dim() != gds.front().dim() || sample.scale != scale) {
    throw DimensionMismatch("sample does not match model dimensions");
  }
  return predict_v(v_transform(sample).v);
}

double dim_objective(const DimStats& st, double a, double b, double scale) {
  const double s1 = st.s_label[0] + st.s_var[0];
  const double s2 = st.s_label[1] + st.s_var[1];
  const double t = st.t_label + st.t_var;
  return (a - 1.0) * s1 + (b - 1.0) * s2 -
         t * beta_log_norm(a, b, std::log(scale));
}

std::array<double, 2> dim_gradient_xi(const DimStats& st, double a, double b,
                                      double scale) {
  const double t = st.t_label + st.t_var;
  const double psi_ab = boost::math::digamma(a + b);
  const double log_a = std::log(scale);
  const double ga = st.s_label[0] + st.s_var[0] -
                    t * (boost::math::digamma(a) - psi_ab + log_a);
  const double gb = st.s_label[1] + st.s_var[1] -
                    t * (boost::math::digamma(b) - psi_ab + log_a);
  return {a * ga, b * gb};
}

Eigen::Matrix2d dim_hessian_xi(const DimStats& st, double a, double b,
                               double scale) {
  const double t = st.t_label + st.t_var;
  const std::array<double, 2> g = dim_gradient_xi(st, a, b, scale);
  const double tri_ab = boost::math::trigamma(a + b);
  Eigen::Matrix2d h;
  h(0, 0) = g[0] + a * a * t * (tri_ab - boost::math::trigamma(a));
  h(1, 1) = g[1] + b * b * t * (tri_ab - boost::math::trigamma(b));
  h(0, 1) = h(1, 0) = a * b * t * tri_ab;
  return h;
}

NewtonOutcome newton_step(const DimStats& st, double a, double b, double scale) {
  NewtonOutcome out{a, b, false, 0};
  const std::array<double, 2> grad = dim_gradient_xi(st, a, b, scale);
  const double gnorm = std::abs(grad[0]) + std::abs(grad[1]);
  if (!(gnorm > 0.0) || !std::isfinite(gnorm)) return out;

  const double t = st.t_label + st.t_var;
  // Rank-one decomposition H = R + e3 g g^T with g = (a, b).
  const double e3 = t * boost::math::trigamma(a + b);
  const double r1 = grad[0] - a * a * t * boost::math::trigamma(a);
  const double r2 = grad[1] - b * b * t * boost::math::trigamma(b);
  Eigen::Vector2d step;
  const Eigen::Vector2d g(grad[0], grad[1]);
  try {
    step = -(newton_hessian_inverse(r1, r2, e3, a, b) * g);
  } catch (const SingularBlock&) {
    const Eigen::Matrix2d h = dim_hessian_xi(st, a, b, scale);
    const double det = h.determinant();
    if (std::abs(det) < 1e-300) {
      out.rejected = true;
      return out;
    }
    step = -(h.inverse() * g);
  }

  const double phi0 = dim_objective(st, a, b, scale);
  const double xi_a = std::log(a);
  const double xi_b = std::log(b);
  double scale_factor = 1.0;
  for (int h = 0; h <= 10; ++h) {
    const double na = std::exp(xi_a + scale_factor * step[0]);
    const double nb = std::exp(xi_b + scale_factor * step[1]);
    const bool inside = na >= kShapeMin && na <= kShapeMax &&
                        nb >= kShapeMin && nb <= kShapeMax;
    if (inside && dim_objective(st, na, nb, scale) >= phi0) {
      out.a = na;
      out.b = nb;
      out.halvings = h;
      return out;
    }
    scale_factor *= 0.5;
  }
  out.rejected = true;
  return out;
}

std::vector<double> update_alphas(const std::vector<double>& label_mass,
                                  const std::vector<double>& var_mass,
                                  double total, double var_total,
                                  double min_alpha,
                                  std::vector<std::string>* warnings) {
  const int c = static_cast<int>(label_mass.size());
  std::vector<double> alphas(c);
  const double denom = total + var_total;
  if (!(denom > 0.0)) throw NoEffectiveData("zero total mass");
  double partial = 0.0;
  for (int j = 0; j + 1 < c; ++j) {
    alphas[j] = (label_mass[j] + var_mass[j]) / denom;
    partial += alphas[j];
  }
  alphas[c - 1] = 1.0 - partial;

  bool negative = false;
  for (double a : alphas) negative = negative || a < 0.0;
  if (negative && warnings) {
    warnings->push_back("NegativeAlpha: closed-form weight left the simplex");
  }
  double sum = 0.0;
  for (double& a : alphas) {
    a = std::clamp(a, min_alpha, 1.0);
    sum += a;
  }
  for (double& a : alphas) a /= sum;
  return alphas;
}

std::vector<std::vector<double>> one_hot_targets(const Dataset& data) {
  std::vector<std::vector<double>> targets(
      data.size(), std::vector<double>(data.class_count, 0.0));
  for (int n = 0; n < data.size(); ++n) {
    if (!data.samples[n].label) {
      throw NoEffectiveData("sample " + std::to_string(n) + " is unlabeled");
    }
    targets[n][*data.samples[n].label] = 1.0;
  }
  return targets;
}

namespace {

struct Aggregates {
  // Per component: sum_n H_n W_nk xddot_nk and sum_n H_n W_nk.
  std::vector<std::vector<double>> a_vec;
  std::vector<double> t_var;
  double cst_mass = 0.0; // sum_n H_n cst_n
  double w_total = 0.0;  // sum_{n,k} H_n W_nk
};

Aggregates aggregate_states(const std::vector<VariationalState>& states,
                            const std::vector<double>& weights, int classes,
                            int nat_size) {
  Aggregates agg;
  agg.a_vec.assign(classes, std::vector<double>(nat_size, 0.0));
  agg.t_var.assign(classes, 0.0);
  for (std::size_t n = 0; n < states.size(); ++n) {
    const double h_n = weights[n];
    if (h_n == 0.0) continue;
    const VariationalState& st = states[n];
    agg.cst_mass += h_n * st.cst;
    for (int k = 0; k < classes; ++k) {
      const double hw = h_n * st.W[k];
      agg.t_var[k] += hw;
      agg.w_total += hw;
      const std::vector<double>& xd = st.xddot[k];
      for (int i = 0; i < nat_size; ++i) agg.a_vec[k][i] += hw * xd[i];
    }
  }
  return agg;
}

} // namespace

std::pair<DGDModel, FitReport> fit(const Dataset& data,
                                   const std::vector<std::vector<double>>& targets,
                                   const std::vector<double>& weights,
                                   const FitConfig& cfg,
                                   const DGDModel* warm_start) {
  data.check_consistent();
  const int n = data.size();
  if (n == 0) throw NoEffectiveData("empty dataset");
  if (static_cast<int>(targets.size()) != n) {
    throw DimensionMismatch("targets row count mismatch");
  }
  const int classes = static_cast<int>(targets.front().size());
  if (classes < 1) throw DimensionMismatch("no classes");
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) {
    throw OutOfRange("tol must be positive and max_iter >= 1");
  }
  const int dim = data.dim();
  const double scale = data.scale();
  const int nat_size = 2 * dim + classes - 1;

  std::vector<double> h_weights(weights);
  if (h_weights.empty()) h_weights.assign(n, 1.0);
  if (static_cast<int>(h_weights.size()) != n) {
    throw DimensionMismatch("weights size mismatch");
  }
  double total = 0.0;
  for (double w : h_weights) {
    if (w < 0.0) throw OutOfRange("weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw NoEffectiveData("all sample weights are zero");
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (double t : targets[i]) {
      if (t < 0.0) throw OutOfRange("targets must be nonnegative");
      row += t;
    }
    if (std::abs(row - 1.0) > 1e-6) {
      throw OutOfRange("target row " + std::to_string(i) + " sums to " +
                       std::to_string(row));
    }
  }

  // v-space view of the data plus the fixed label-side sums.
  std::vector<std::vector<double>> v_rows(n);
  for (int i = 0; i < n; ++i) v_rows[i] = v_transform(data.samples[i]).v;

  FitReport report;
  DGDModel model;
  if (warm_start != nullptr) {
    model = *warm_start;
    if (model.class_count != classes || model.gds.front().dim() != dim) {
      throw DimensionMismatch("warm start does not match data/targets");
    }
  } else {
    model.class_count = classes;
    model.scale = scale;
    model.gds.resize(classes);
    for (int c = 0; c < classes; ++c) {
      std::vector<double> cw(n);
      double mass = 0.0;
      for (int i = 0; i < n; ++i) {
        cw[i] = h_weights[i] * targets[i][c];
        mass += cw[i];
      }
      if (mass > 0.0) {
        const MomentInit mi = moment_init_v(v_rows, scale, cw);
        model.gds[c] = mi.params;
        if (mi.degenerate) {
          report.warnings.push_back("moment init fell back to (1,1) for class " +
                                    std::to_string(c));
        }
      } else {
        model.gds[c].scale = scale;
        model.gds[c].shapes.assign(dim, {1.0, 1.0});
        report.warnings.push_back("class " + std::to_string(c) +
                                  " has no effective mass at init");
      }
    }
    std::vector<double> prior(classes, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < classes; ++c) prior[c] += h_weights[i] * targets[i][c];
    }
    model.alphas = update_alphas(prior, std::vector<double>(classes - 1, 0.0),
                                 total, 0.0, cfg.min_alpha, nullptr);
  }

  std::vector<double> label_mass(classes, 0.0);
  std::vector<std::vector<std::array<double, 2>>> label_sums(
      classes, std::vector<std::array<double, 2>>(dim, {0.0, 0.0}));
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < classes; ++c) {
      const double w = h_weights[i] * targets[i][c];
      if (w == 0.0) continue;
      label_mass[c] += w;
      for (int d = 0; d < dim; ++d) {
        label_sums[c][d][0] += w * std::log(v_rows[i][d]);
        label_sums[c][d][1] += w * std::log(scale - v_rows[i][d]);
      }
    }
  }

  // Weighted discriminative objective sum_n H_n sum_c h_nc ln pi_c(x_n);
  // under zero_variational the maximized quantity is the weighted joint
  // likelihood instead.
  const auto objective = [&](const DGDModel& m) {
    std::vector<double> per_sample(n, 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      if (h_weights[i] == 0.0) return;
      std::vector<double> logp(classes);
      double top = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < classes; ++c) {
        logp[c] = std::log(m.alphas[c]) + log_density_v(m.gds[c], v_rows[i]);
        top = std::max(top, logp[c]);
      }
      double z = 0.0;
      for (int c = 0; c < classes; ++c) z += std::exp(logp[c] - top);
      const double logmix = top + std::log(z);
      double val = 0.0;
      for (int c = 0; c < classes; ++c) {
        if (targets[i][c] == 0.0) continue;
        val += targets[i][c] *
               (cfg.zero_variational ? logp[c] : logp[c] - logmix);
      }
      per_sample[i] = h_weights[i] * val;
    });
    double sum = 0.0;
    for (double s : per_sample) sum += s;
    return sum;
  };

  double phi = objective(model);
  if (!std::isfinite(phi)) throw NonFiniteObjective("objective at init");

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    Aggregates agg;
    agg.a_vec.assign(classes, std::vector<double>(nat_size, 0.0));
    agg.t_var.assign(classes, 0.0);
    if (!cfg.zero_variational) {
      const MixtureBound bound(model.alphas, model.gds);
      std::vector<VariationalState> states(n);
      parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        states[i] = bound.state_for(v_rows[i]);
      });
      agg = aggregate_states(states, h_weights, classes, nat_size);
    }

    for (int sweep = 0; sweep < cfg.newton_inner_iters; ++sweep) {
      for (int c = 0; c < classes; ++c) {
        for (int d = 0; d < dim; ++d) {
          DimStats st;
          st.t_label = label_mass[c];
          st.t_var = agg.t_var[c];
          st.s_label = label_sums[c][d];
          st.s_var = {agg.a_vec[c][2 * d], agg.a_vec[c][2 * d + 1]};
          const NewtonOutcome res = newton_step(st, model.gds[c].shapes[d][0],
                                                model.gds[c].shapes[d][1], scale);
          if (res.rejected) {
            report.warnings.push_back("StepRejected: class " +
                                      std::to_string(c) + " dimension " +
                                      std::to_string(d) + " iteration " +
                                      std::to_string(iter));
          } else {
            model.gds[c].shapes[d] = {res.a, res.b};
          }
        }
      }
    }

    if (classes > 1) {
      std::vector<double> var_mass(classes - 1, 0.0);
      for (int j = 0; j + 1 < classes; ++j) {
        for (int k = 0; k < classes; ++k) var_mass[j] += agg.a_vec[k][2 * dim + j];
      }
      std::vector<double> next = update_alphas(label_mass, var_mass, total,
                                               agg.w_total, cfg.min_alpha,
                                               &report.warnings);
      if (!cfg.zero_variational) {
        const double before = alpha_objective(model.alphas, label_mass,
                                              var_mass, agg.w_total);
        const double after =
            alpha_objective(next, label_mass, var_mass, agg.w_total);
        if (after >= before) {
          model.alphas = std::move(next);
        } else {
          report.warnings.push_back(
              "alpha update reverted after clamping at iteration " +
              std::to_string(iter));
        }
      } else {
        model.alphas = std::move(next);
      }
    }

    // Lower bound after the M-step: joint part plus the variational terms
    // against the new parameters, minus the per-sample constants.
    double joint = 0.0;
    for (int c = 0; c < classes; ++c) {
      double dens = label_mass[c] * std::log(model.alphas[c]);
      for (int d = 0; d < dim; ++d) {
        const double a = model.gds[c].shapes[d][0];
        const double b = model.gds[c].shapes[d][1];
        dens += (a - 1.0) * label_sums[c][d][0] + (b - 1.0) * label_sums[c][d][1];
        dens -= label_mass[c] * beta_log_norm(a, b, std::log(scale));
      }
      joint += dens;
    }
    double lower = joint;
    if (!cfg.zero_variational) {
      for (int k = 0; k < classes; ++k) {
        const ExpFamComponent comp = make_component(model.alphas, model.gds, k);
        lower += natural_dot(agg.a_vec[k], comp) - agg.t_var[k] * cumulant(comp);
      }
      lower -= agg.cst_mass;
    }
    report.objective_trace.push_back(lower);

    const double phi_new = objective(model);
    if (!std::isfinite(phi_new)) {
      throw NonFiniteObjective("objective diverged at iteration " +
                               std::to_string(iter));
    }
    report.phi_trace.push_back(phi_new);
    report.iterations = iter;
    const double change = std::abs(phi_new - phi);
    phi = phi_new;
    if (change <= cfg.tol * std::max(1.0, std::abs(phi_new))) {
      report.converged = true;
      break;
    }
  }
  return {std::move(model), std::move(report)};
}

std::pair<DGDModel, FitReport> fit_labeled(const Dataset& data,
                                           const FitConfig& cfg) {
  return fit(data, one_hot_targets(data), {}, cfg);
}

std::pair<DGDModel, FitReport> fit_generative(const Dataset& data,
                                              const FitConfig& cfg) {
  FitConfig gen = cfg;
  gen.zero_variational = true;
  return fit(data, one_hot_targets(data), {}, gen);
}

} // namespace gdmix
