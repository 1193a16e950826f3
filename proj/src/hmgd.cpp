#include "gdmix/hmgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "gdmix/parallel.hpp"
#include "gdmix/simplex.hpp"

namespace gdmix {

namespace {

// Iteration caps for the hierarchical fit; greater values overfit.
constexpr int kOuterIterations = 10;
constexpr int kGatingIterations = 5;
constexpr int kExpertIterations = 30;
constexpr double kPruneThreshold = 0.01;

double logsumexp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Seeded Lloyd clustering on v-space rows; every cluster is kept non-empty
// by reseeding to the farthest point.
std::vector<int> kmeans_labels(const std::vector<std::vector<double>>& rows,
                               int k, std::uint64_t seed) {
  const int n = static_cast<int>(rows.size());
  std::vector<int> labels(n, 0);
  if (k <= 1) return labels;
  if (n <= k) {
    for (int i = 0; i < n; ++i) labels[i] = i % k;
    return labels;
  }
  const int dim = static_cast<int>(rows.front().size());
  std::mt19937_64 rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<double>> centers(k, std::vector<double>(dim));
  for (int c = 0; c < k; ++c) centers[c] = rows[order[c]];

  const auto sqdist = [&](const std::vector<double>& a,
                          const std::vector<double>& b) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  };

  for (int it = 0; it < 50; ++it) {
    bool moved = false;
    std::vector<double> best(n);
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      double d0 = sqdist(rows[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sqdist(rows[i], centers[c]);
        if (d < d0) {
          d0 = d;
          arg = c;
        }
      }
      best[i] = d0;
      if (labels[i] != arg) {
        labels[i] = arg;
        moved = true;
      }
    }
    std::vector<int> count(k, 0);
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    for (int i = 0; i < n; ++i) {
      count[labels[i]] += 1;
      for (int d = 0; d < dim; ++d) sums[labels[i]][d] += rows[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] == 0) {
        int far = 0;
        for (int i = 1; i < n; ++i) {
          if (best[i] > best[far]) far = i;
        }
        labels[far] = c;
        centers[c] = rows[far];
        best[far] = 0.0;
        moved = true;
        continue;
      }
      for (int d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / count[c];
    }
    if (!moved && it > 0) break;
  }
  return labels;
}

DGDModel init_gating(const std::vector<std::vector<double>>& v_rows,
                     const std::vector<int>& cluster, int k, double scale,
                     double min_alpha) {
  const int n = static_cast<int>(v_rows.size());
  DGDModel g;
  g.class_count = k;
  g.scale = scale;
  g.gds.resize(k);
  g.alphas.resize(k);
  const int dim = static_cast<int>(v_rows.front().size());
  for (int c = 0; c < k; ++c) {
    std::vector<double> w(n, 0.0);
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      if (cluster[i] == c) {
        w[i] = 1.0;
        mass += 1.0;
      }
    }
    if (mass >= 2.0) {
      g.gds[c] = moment_init_v(v_rows, scale, w).params;
    } else {
      g.gds[c].scale = scale;
      g.gds[c].shapes.assign(dim, {1.0, 1.0});
    }
    g.alphas[c] = std::max(mass / n, min_alpha);
  }
  double sum = 0.0;
  for (double a : g.alphas) sum += a;
  for (double& a : g.alphas) a /= sum;
  return g;
}

DGDModel init_expert(const std::vector<std::vector<double>>& v_rows,
                     const std::vector<int>& labels,
                     const std::vector<char>& member, int classes,
                     double scale) {
  const int n = static_cast<int>(v_rows.size());
  const int dim = static_cast<int>(v_rows.front().size());
  DGDModel e;
  e.class_count = classes;
  e.scale = scale;
  e.gds.resize(classes);
  e.alphas.resize(classes);
  int members = 0;
  for (int i = 0; i < n; ++i) members += member[i] ? 1 : 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> w(n, 0.0);
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      if (member[i] && labels[i] == c) {
        w[i] = 1.0;
        mass += 1.0;
      }
    }
    if (mass < 2.0) {
      // subregion misses the class: fall back to the global class fit
      mass = 0.0;
      for (int i = 0; i < n; ++i) {
        w[i] = labels[i] == c ? 1.0 : 0.0;
        mass += w[i];
      }
    }
    if (mass >= 2.0) {
      e.gds[c] = moment_init_v(v_rows, scale, w).params;
    } else {
      e.gds[c].scale = scale;
      e.gds[c].shapes.assign(dim, {1.0, 1.0});
    }
    double in_region = 0.0;
    for (int i = 0; i < n; ++i) {
      if (member[i] && labels[i] == c) in_region += 1.0;
    }
    e.alphas[c] = (in_region + 1.0) / (members + classes);
  }
  double sum = 0.0;
  for (double a : e.alphas) sum += a;
  for (double& a : e.alphas) a /= sum;
  return e;
}

struct EStepResult {
  Responsibilities resp;
  double objective = 0.0; // expected complete log posterior, fresh resp.
  double loglik = 0.0;    // sum_n ln p(y_n | x_n)
};

EStepResult e_step_full(const HMGDTree& tree, const Dataset& data,
                        const std::vector<std::vector<double>>& v_rows) {
  const int n = data.size();
  const int regions = tree.regions();
  EStepResult out;
  out.resp.h0.assign(n, std::vector<double>(regions, 0.0));
  out.resp.h1.resize(regions);
  for (int i = 0; i < regions; ++i) {
    out.resp.h1[i].assign(n, std::vector<double>(tree.subregions(i), 0.0));
  }
  std::vector<double> objective(n, 0.0);
  std::vector<double> loglik(n, 0.0);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t s) {
    const int idx = static_cast<int>(s);
    const std::vector<double>& v = v_rows[idx];
    const int y = *data.samples[idx].label;
    const std::vector<double> log_g0 = tree.root_gating.log_posterior_v(v);
    std::vector<double> region_total(regions);
    std::vector<std::vector<double>> leaf_terms(regions);
    for (int i = 0; i < regions; ++i) {
      const int subs = tree.subregions(i);
      const std::vector<double> log_g1 = tree.inner_gatings[i].log_posterior_v(v);
      leaf_terms[i].resize(subs);
      for (int j = 0; j < subs; ++j) {
        const std::vector<double> log_pe =
            tree.experts[i][j].log_posterior_v(v);
        leaf_terms[i][j] = log_g1[j] + log_pe[y];
      }
      const double ls = logsumexp(leaf_terms[i]);
      for (int j = 0; j < subs; ++j) {
        out.resp.h1[i][idx][j] = std::exp(leaf_terms[i][j] - ls);
      }
      region_total[i] = log_g0[i] + ls;
    }
    const double lz = logsumexp(region_total);
    loglik[idx] = lz;
    double obj = 0.0;
    for (int i = 0; i < regions; ++i) {
      const double h0 = std::exp(region_total[i] - lz);
      out.resp.h0[idx][i] = h0;
      if (h0 == 0.0) continue;
      for (int j = 0; j < tree.subregions(i); ++j) {
        const double h1 = out.resp.h1[i][idx][j];
        if (h1 == 0.0) continue;
        obj += h0 * h1 * (log_g0[i] + leaf_terms[i][j]);
      }
    }
    objective[idx] = obj;
  });
  for (int i = 0; i < n; ++i) {
    out.objective += objective[i];
    out.loglik += loglik[i];
  }
  return out;
}

} // namespace

std::vector<double> HMGDTree::predict_proba_v(const std::vector<double>& v) const {
  std::vector<double> proba(class_count, 0.0);
  const std::vector<double> g0 = root_gating.posterior_v(v);
  for (int i = 0; i < regions(); ++i) {
    const std::vector<double> g1 = inner_gatings[i].posterior_v(v);
    for (int j = 0; j < subregions(i); ++j) {
      const std::vector<double> pe = experts[i][j].posterior_v(v);
      const double w = g0[i] * g1[j];
      for (int c = 0; c < class_count; ++c) proba[c] += w * pe[c];
    }
  }
  return proba;
}

std::vector<double> HMGDTree::predict_proba(const CompositionalSample& sample) const {
  if (sample.scale != scale) throw DimensionMismatch("scale mismatch");
  return predict_proba_v(v_transform(sample).v);
}

int HMGDTree::predict(const CompositionalSample& sample) const {
  const std::vector<double> proba = predict_proba(sample);
  int best = 0;
  for (int c = 1; c < class_count; ++c) {
    if (proba[c] > proba[best]) best = c;
  }
  return best;
}

Responsibilities e_step(const HMGDTree& tree, const Dataset& data) {
  data.check_consistent();
  std::vector<std::vector<double>> v_rows(data.size());
  for (int i = 0; i < data.size(); ++i) {
    v_rows[i] = v_transform(data.samples[i]).v;
  }
  return e_step_full(tree, data, v_rows).resp;
}

void m_step(HMGDTree& tree, const Dataset& data, const Responsibilities& resp,
            const FitConfig& cfg, HMGDReport* report) {
  const int n = data.size();
  const int regions = tree.regions();

  FitConfig gating_cfg = cfg;
  gating_cfg.max_iter = kGatingIterations;
  FitConfig expert_cfg = cfg;
  expert_cfg.max_iter = kExpertIterations;

  const auto note = [&](const std::string& msg) {
    if (report != nullptr) report->warnings.push_back(msg);
  };

  if (regions > 1) {
    try {
      tree.root_gating =
          fit(data, resp.h0, {}, gating_cfg, &tree.root_gating).first;
    } catch (const Error& err) {
      note(std::string("root gating fit skipped: ") + err.what());
    }
  }
  for (int i = 0; i < regions; ++i) {
    std::vector<double> region_weight(n);
    for (int s = 0; s < n; ++s) region_weight[s] = resp.h0[s][i];
    if (tree.subregions(i) > 1) {
      try {
        tree.inner_gatings[i] = fit(data, resp.h1[i], region_weight, gating_cfg,
                                    &tree.inner_gatings[i]).first;
      } catch (const Error& err) {
        note("inner gating " + std::to_string(i) + " fit skipped: " + err.what());
      }
    }
    for (int j = 0; j < tree.subregions(i); ++j) {
      std::vector<double> leaf_weight(n);
      for (int s = 0; s < n; ++s) {
        leaf_weight[s] = resp.h0[s][i] * resp.h1[i][s][j];
      }
      try {
        tree.experts[i][j] = fit(data, one_hot_targets(data), leaf_weight,
                                 expert_cfg, &tree.experts[i][j]).first;
      } catch (const Error& err) {
        note("expert (" + std::to_string(i) + "," + std::to_string(j) +
             ") fit skipped: " + err.what());
      }
    }
  }
}

void prune(HMGDTree& tree, double threshold,
           std::vector<std::string>* warnings) {
  const auto note = [&](const std::string& msg) {
    if (warnings != nullptr) warnings->push_back(msg);
  };
  const auto drop_components = [](DGDModel& model, const std::vector<int>& keep) {
    DGDModel out;
    out.class_count = static_cast<int>(keep.size());
    out.scale = model.scale;
    double sum = 0.0;
    for (int idx : keep) {
      out.alphas.push_back(model.alphas[idx]);
      out.gds.push_back(model.gds[idx]);
      sum += model.alphas[idx];
    }
    for (double& a : out.alphas) a /= sum;
    model = std::move(out);
  };

  std::vector<int> keep_regions;
  for (int i = 0; i < tree.regions(); ++i) {
    if (tree.root_gating.alphas[i] >= threshold) keep_regions.push_back(i);
  }
  if (keep_regions.empty()) {
    note("WouldEmptyTree: every root branch is below the prune threshold");
  } else if (static_cast<int>(keep_regions.size()) < tree.regions()) {
    drop_components(tree.root_gating, keep_regions);
    std::vector<DGDModel> gatings;
    std::vector<std::vector<DGDModel>> experts;
    for (int idx : keep_regions) {
      gatings.push_back(std::move(tree.inner_gatings[idx]));
      experts.push_back(std::move(tree.experts[idx]));
    }
    tree.inner_gatings = std::move(gatings);
    tree.experts = std::move(experts);
  }

  for (int i = 0; i < tree.regions(); ++i) {
    std::vector<int> keep;
    for (int j = 0; j < tree.subregions(i); ++j) {
      if (tree.inner_gatings[i].alphas[j] >= threshold) keep.push_back(j);
    }
    if (keep.empty()) {
      note("WouldEmptyTree: every branch of inner gating " + std::to_string(i) +
           " is below the prune threshold");
      continue;
    }
    if (static_cast<int>(keep.size()) == tree.subregions(i)) continue;
    drop_components(tree.inner_gatings[i], keep);
    std::vector<DGDModel> kept;
    for (int idx : keep) kept.push_back(std::move(tree.experts[i][idx]));
    tree.experts[i] = std::move(kept);
  }
}

std::pair<HMGDTree, HMGDReport> fit_tree(const Dataset& data,
                                         const HMGDStructure& structure,
                                         const FitConfig& cfg) {
  data.check_consistent();
  if (data.size() == 0) throw NoEffectiveData("empty dataset");
  if (data.class_count < 1) throw DimensionMismatch("class count not set");
  const int regions = structure.regions;
  if (regions < 1) throw OutOfRange("need at least one region");
  std::vector<int> subregions = structure.subregions;
  if (subregions.empty()) subregions.assign(regions, 1);
  if (static_cast<int>(subregions.size()) == 1 && regions > 1) {
    subregions.assign(regions, subregions.front());
  }
  if (static_cast<int>(subregions.size()) != regions) {
    throw DimensionMismatch("one subregion count per region expected");
  }

  const int n = data.size();
  std::vector<std::vector<double>> v_rows(n);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    v_rows[i] = v_transform(data.samples[i]).v;
    if (!data.samples[i].label) throw NoEffectiveData("unlabeled sample");
    labels[i] = *data.samples[i].label;
  }
  const double scale = data.scale();

  bool flat = regions == 1;
  for (int m : subregions) flat = flat && m == 1;
  if (flat) {
    // Degenerate tree: both gatings are identically one, so the fit IS the
    // plain DGD fit.
    HMGDTree tree;
    tree.levels = 2;
    tree.class_count = data.class_count;
    tree.scale = scale;
    auto [expert, expert_report] = fit_labeled(data, cfg);
    DGDModel trivial;
    trivial.class_count = 1;
    trivial.scale = scale;
    trivial.alphas = {1.0};
    trivial.gds = {moment_init_v(v_rows, scale, {}).params};
    tree.root_gating = trivial;
    tree.inner_gatings = {trivial};
    tree.experts = {{std::move(expert)}};
    HMGDReport report;
    report.objective_trace = expert_report.phi_trace;
    report.loglik_trace = expert_report.phi_trace;
    report.iterations = expert_report.iterations;
    report.converged = expert_report.converged;
    report.warnings = std::move(expert_report.warnings);
    return {std::move(tree), std::move(report)};
  }

  HMGDTree tree;
  tree.levels = 2;
  tree.class_count = data.class_count;
  tree.scale = scale;
  const std::vector<int> cluster = kmeans_labels(v_rows, regions, cfg.seed);
  tree.root_gating = init_gating(v_rows, cluster, regions, scale, cfg.min_alpha);
  tree.inner_gatings.resize(regions);
  tree.experts.resize(regions);
  for (int i = 0; i < regions; ++i) {
    std::vector<std::vector<double>> member_rows;
    std::vector<int> member_index;
    for (int s = 0; s < n; ++s) {
      if (cluster[s] == i) {
        member_rows.push_back(v_rows[s]);
        member_index.push_back(s);
      }
    }
    std::vector<int> sub(n, 0);
    if (!member_rows.empty()) {
      const std::vector<int> sub_local =
          kmeans_labels(member_rows, subregions[i], cfg.seed + 1 + i);
      for (std::size_t m = 0; m < member_index.size(); ++m) {
        sub[member_index[m]] = sub_local[m];
      }
    }
    std::vector<int> sub_for_init(n, -1);
    std::vector<int> sub_members;
    for (int s = 0; s < n; ++s) {
      if (cluster[s] == i) {
        sub_for_init[s] = sub[s];
        sub_members.push_back(sub[s]);
      }
    }
    if (member_rows.empty()) {
      tree.inner_gatings[i] = init_gating(v_rows, std::vector<int>(n, 0),
                                          subregions[i], scale, cfg.min_alpha);
    } else {
      tree.inner_gatings[i] = init_gating(member_rows, sub_members,
                                          subregions[i], scale, cfg.min_alpha);
    }
    tree.experts[i].resize(subregions[i]);
    for (int j = 0; j < subregions[i]; ++j) {
      std::vector<char> member(n, 0);
      for (int s = 0; s < n; ++s) {
        member[s] = (cluster[s] == i && sub_for_init[s] == j) ? 1 : 0;
      }
      tree.experts[i][j] =
          init_expert(v_rows, labels, member, data.class_count, scale);
    }
  }

  HMGDReport report;
  EStepResult e = e_step_full(tree, data, v_rows);
  report.objective_trace.push_back(e.objective);
  report.loglik_trace.push_back(e.loglik);
  double prev = e.objective;
  for (int iter = 1; iter <= kOuterIterations; ++iter) {
    m_step(tree, data, e.resp, cfg, &report);
    prune(tree, kPruneThreshold, &report.warnings);
    e = e_step_full(tree, data, v_rows);
    report.objective_trace.push_back(e.objective);
    report.loglik_trace.push_back(e.loglik);
    report.iterations = iter;
    const double change = std::abs(e.objective - prev);
    prev = e.objective;
    if (change <= cfg.tol * std::max(1.0, std::abs(e.objective))) {
      report.converged = true;
      break;
    }
  }
  return {std::move(tree), std::move(report)};
}

} // namespace gdmix
