#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "gdmix/dgd.hpp"
#include "oracles.hpp"

using namespace gdmix;

namespace {

DGDModel identical_class_model(int classes, const std::vector<double>& alphas) {
  DGDModel m;
  m.class_count = classes;
  m.alphas = alphas;
  m.scale = 1.0;
  GDParams p;
  p.scale = 1.0;
  p.shapes = {{3.0, 2.0}, {2.0, 5.0}};
  m.gds.assign(classes, p);
  return m;
}

Dataset two_class_gd(int n, std::uint64_t seed) {
  GDParams a;
  a.scale = 1.0;
  a.shapes = {{8.0, 2.0}, {8.0, 2.0}, {8.0, 2.0}};
  GDParams b;
  b.scale = 1.0;
  b.shapes = {{2.0, 8.0}, {2.0, 8.0}, {2.0, 8.0}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  Dataset data;
  data.class_count = 2;
  for (int i = 0; i < n; ++i) {
    const int y = coin(rng);
    CompositionalSample s = sample(y == 0 ? a : b, rng);
    s.label = y;
    data.samples.push_back(std::move(s));
  }
  return data;
}

} // namespace

TEST_CASE("posterior symmetry and prior dominance") {
  std::mt19937_64 rng(3);
  const CompositionalSample x = oracles::random_sample(rng, 3);

  const DGDModel uniform = identical_class_model(3, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  for (double p : uniform.posterior(x)) {
    CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  const DGDModel skew = identical_class_model(2, {0.9, 0.1});
  const std::vector<double> post = skew.posterior(x);
  CHECK(post[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(post[1] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("well-separated one-dimensional classes give decisive posteriors") {
  DGDModel m;
  m.class_count = 2;
  m.alphas = {0.5, 0.5};
  m.scale = 1.0;
  m.gds.resize(2);
  m.gds[0].scale = m.gds[1].scale = 1.0;
  m.gds[0].shapes = {{50.0, 10.0}};
  m.gds[1].shapes = {{10.0, 50.0}};
  const std::vector<double> post = m.posterior({{0.9, 0.1}, 1.0, {}});
  CHECK(post[0] > 0.999);
  CHECK(post[0] + post[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("predict takes the argmax and breaks ties toward the lowest index") {
  std::mt19937_64 rng(5);
  const CompositionalSample x = oracles::random_sample(rng, 3);
  CHECK(identical_class_model(3, {0.2, 0.5, 0.3}).predict(x) == 1);
  CHECK(identical_class_model(2, {0.5, 0.5}).predict(x) == 0);
  // scaling all alphas by the same factor before normalization cannot
  // change the argmax
  CHECK(identical_class_model(3, {0.04, 0.1, 0.06}).predict(x) == 1);
}

TEST_CASE("posteriors are simplices for random models and samples") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    DGDModel m;
    m.class_count = 3;
    m.alphas = oracles::random_weights(rng, 3);
    m.scale = 1.0;
    for (int c = 0; c < 3; ++c) {
      m.gds.push_back(oracles::random_gd(rng, 3, kShapeMin, kShapeMax));
    }
    const CompositionalSample x = oracles::random_sample(rng, 4, 0.7);
    const std::vector<double> post = m.posterior(x);
    double sum = 0.0;
    for (double p : post) {
      CHECK(std::isfinite(p));
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("per-dimension gradient matches finite differences in xi") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shape(0.5, 20.0);
  std::uniform_real_distribution<double> mass(0.5, 50.0);
  std::uniform_real_distribution<double> logv(-4.0, -0.05);
  for (int t = 0; t < 100; ++t) {
    DimStats st;
    st.t_label = mass(rng);
    st.t_var = 0.2 * mass(rng);
    st.s_label = {st.t_label * logv(rng), st.t_label * logv(rng)};
    st.s_var = {st.t_var * logv(rng), st.t_var * logv(rng)};
    const double a = shape(rng);
    const double b = shape(rng);
    const double scale = (t % 4 == 0) ? 2.0 : 1.0;
    const std::array<double, 2> grad = dim_gradient_xi(st, a, b, scale);
    const double step = 1e-5;
    const double fd_a =
        (dim_objective(st, std::exp(std::log(a) + step), b, scale) -
         dim_objective(st, std::exp(std::log(a) - step), b, scale)) /
        (2.0 * step);
    const double fd_b =
        (dim_objective(st, a, std::exp(std::log(b) + step), scale) -
         dim_objective(st, a, std::exp(std::log(b) - step), scale)) /
        (2.0 * step);
    CHECK(grad[0] == doctest::Approx(fd_a).epsilon(1e-5).scale(std::abs(fd_a) + 1.0));
    CHECK(grad[1] == doctest::Approx(fd_b).epsilon(1e-5).scale(std::abs(fd_b) + 1.0));
  }
}

TEST_CASE("per-dimension Hessian matches finite differences of the gradient") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> shape(0.5, 20.0);
  std::uniform_real_distribution<double> mass(0.5, 50.0);
  std::uniform_real_distribution<double> logv(-4.0, -0.05);
  for (int t = 0; t < 100; ++t) {
    DimStats st;
    st.t_label = mass(rng);
    st.t_var = 0.3 * mass(rng);
    st.s_label = {st.t_label * logv(rng), st.t_label * logv(rng)};
    st.s_var = {st.t_var * logv(rng), st.t_var * logv(rng)};
    const double a = shape(rng);
    const double b = shape(rng);
    const Eigen::Matrix2d hess = dim_hessian_xi(st, a, b, 1.0);
    const double step = 1e-5;
    const auto grad_at = [&](double xa, double xb) {
      return dim_gradient_xi(st, std::exp(xa), std::exp(xb), 1.0);
    };
    const double xa = std::log(a);
    const double xb = std::log(b);
    const auto gpa = grad_at(xa + step, xb);
    const auto gma = grad_at(xa - step, xb);
    const auto gpb = grad_at(xa, xb + step);
    const auto gmb = grad_at(xa, xb - step);
    const double fd[2][2] = {
        {(gpa[0] - gma[0]) / (2 * step), (gpb[0] - gmb[0]) / (2 * step)},
        {(gpa[1] - gma[1]) / (2 * step), (gpb[1] - gmb[1]) / (2 * step)}};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        CHECK(hess(i, j) ==
              doctest::Approx(fd[i][j]).epsilon(1e-4).scale(std::abs(fd[i][j]) + 1.0));
      }
    }
  }
}

TEST_CASE("newton_step stays put at a stationary point") {
  const double a = 4.2;
  const double b = 1.7;
  DimStats st;
  st.t_label = 25.0;
  st.t_var = 0.0;
  st.s_var = {0.0, 0.0};
  // place the weighted statistics exactly at the gradient of the normalizer
  const std::array<double, 2> g = dim_gradient_xi(
      DimStats{1.0, 0.0, {0.0, 0.0}, {0.0, 0.0}}, a, b, 1.0);
  // dim_gradient_xi with s = 0 gives -a K'_a, so K'_a = -g[0]/a
  st.s_label = {st.t_label * (-g[0] / a), st.t_label * (-g[1] / b)};
  const NewtonOutcome out = newton_step(st, a, b, 1.0);
  CHECK_FALSE(out.rejected);
  CHECK(out.a == doctest::Approx(a).epsilon(1e-9));
  CHECK(out.b == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("newton_step improves the per-dimension objective") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> shape(0.5, 15.0);
  std::uniform_real_distribution<double> logv(-3.0, -0.1);
  for (int t = 0; t < 50; ++t) {
    DimStats st;
    st.t_label = 30.0;
    st.t_var = 5.0;
    st.s_label = {st.t_label * logv(rng), st.t_label * logv(rng)};
    st.s_var = {st.t_var * logv(rng), st.t_var * logv(rng)};
    const double a = shape(rng);
    const double b = shape(rng);
    const NewtonOutcome out = newton_step(st, a, b, 1.0);
    if (!out.rejected) {
      CHECK(dim_objective(st, out.a, out.b, 1.0) >=
            dim_objective(st, a, b, 1.0) - 1e-12);
      CHECK(out.a >= kShapeMin);
      CHECK(out.a <= kShapeMax);
    }
  }
}

TEST_CASE("update_alphas with zero variational mass is the weighted M-step") {
  std::vector<std::string> warnings;
  const std::vector<double> alphas = update_alphas(
      {30.0, 50.0, 20.0}, {0.0, 0.0}, 100.0, 0.0, 1e-3, &warnings);
  CHECK(alphas[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(alphas[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(alphas[2] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(warnings.empty());

  double sum = 0.0;
  for (double a : update_alphas({5.0, 1.0, 4.0}, {0.4, -0.1}, 10.0, 0.5, 1e-3,
                                &warnings)) {
    sum += a;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // a closed form that leaves the simplex is clamped and reported
  const std::vector<double> clamped = update_alphas(
      {0.1, 5.0, 5.0}, {-0.5, 0.0}, 10.0, 0.1, 1e-3, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("NegativeAlpha") != std::string::npos);
  // clamped to min_alpha, then renormalized
  for (double a : clamped) CHECK(a >= 1e-3 * 0.9);
}

TEST_CASE("several Newton sweeps per M-step preserve monotonicity") {
  const Dataset data = two_class_gd(200, 61);
  FitConfig cfg;
  cfg.newton_inner_iters = 3;
  const auto [model, report] = fit_labeled(data, cfg);
  for (std::size_t i = 1; i < report.phi_trace.size(); ++i) {
    CHECK(report.phi_trace[i] >= report.phi_trace[i - 1] - 1e-8);
  }
  int correct = 0;
  for (const auto& s : data.samples) {
    correct += model.predict(s) == *s.label ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / data.size() >= 0.98);
}

TEST_CASE("fit separates a synthetic two-class GD task") {
  const Dataset data = two_class_gd(400, 101);
  FitConfig cfg;
  const auto [model, report] = fit_labeled(data, cfg);
  int correct = 0;
  for (const auto& s : data.samples) {
    correct += model.predict(s) == *s.label ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / data.size() >= 0.98);

  // Phi trace is nondecreasing (bound tangency + maximization)
  for (std::size_t i = 1; i < report.phi_trace.size(); ++i) {
    CHECK(report.phi_trace[i] >= report.phi_trace[i - 1] - 1e-8);
  }
  // the recorded lower bound is a lower bound on the final objective
  CHECK_FALSE(report.objective_trace.empty());
}

TEST_CASE("uniform soft targets keep the mixing weights uniform") {
  const Dataset data = two_class_gd(120, 103);
  std::vector<std::vector<double>> targets(data.size(), {0.5, 0.5});
  FitConfig cfg;
  cfg.max_iter = 5;
  const auto [model, report] = fit(data, targets, {}, cfg);
  CHECK(model.alphas[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(model.alphas[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("mirror-symmetric data keeps the mixing weights balanced") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Dataset data;
  data.class_count = 2;
  for (int i = 0; i < 80; ++i) {
    const double x = u(rng);
    data.samples.push_back({{x, 1.0 - x}, 1.0, 0});
    data.samples.push_back({{1.0 - x, x}, 1.0, 1});
  }
  FitConfig cfg;
  cfg.max_iter = 10;
  const auto [model, report] = fit_labeled(data, cfg);
  CHECK(model.alphas[0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("the fitted objective lower-bounds the true objective on random states") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 30; ++t) {
    const int dim = 1 + (t % 2);
    const int classes = 2 + (t % 2);
    std::vector<double> contact_alphas = oracles::random_weights(rng, classes);
    std::vector<GDParams> contact;
    std::vector<double> eval_alphas = oracles::random_weights(rng, classes);
    std::vector<GDParams> eval;
    for (int c = 0; c < classes; ++c) {
      contact.push_back(oracles::random_gd(rng, dim, 0.5, 15.0));
      eval.push_back(oracles::random_gd(rng, dim, 0.2, 40.0));
    }
    // a few random weighted samples with soft targets
    double phi = 0.0;
    double phi1 = 0.0;
    std::uniform_real_distribution<double> wdist(0.1, 2.0);
    for (int n = 0; n < 8; ++n) {
      std::vector<double> v(dim);
      std::uniform_real_distribution<double> u(0.02, 0.98);
      for (double& x : v) x = u(rng);
      const std::vector<double> h = oracles::random_weights(rng, classes);
      const double weight = wdist(rng);
      const VariationalState st = compute_variational(v, contact_alphas, contact);
      const double bound_val = upper_bound_value(st, eval_alphas, eval);
      const double logmix = log_mixture(eval_alphas, eval, v);
      double joint = 0.0;
      for (int c = 0; c < classes; ++c) {
        joint += h[c] * (std::log(eval_alphas[c]) + log_density_v(eval[c], v));
      }
      phi += weight * (joint - logmix);
      phi1 += weight * (joint - bound_val);
    }
    CHECK(phi1 <= phi + 1e-9);
  }
}

TEST_CASE("generative fit recovers known parameters and exact priors") {
  GDParams a;
  a.scale = 1.0;
  a.shapes = {{3.0, 7.0}, {6.0, 2.0}};
  GDParams b;
  b.scale = 1.0;
  b.shapes = {{5.0, 5.0}, {2.0, 4.0}};
  std::mt19937_64 rng(31);
  Dataset data;
  data.class_count = 2;
  for (int i = 0; i < 5000; ++i) {
    CompositionalSample s0 = sample(a, rng);
    s0.label = 0;
    data.samples.push_back(std::move(s0));
  }
  for (int i = 0; i < 3000; ++i) {
    CompositionalSample s1 = sample(b, rng);
    s1.label = 1;
    data.samples.push_back(std::move(s1));
  }
  FitConfig cfg;
  const auto [model, report] = fit_generative(data, cfg);
  for (int d = 0; d < 2; ++d) {
    CHECK(model.gds[0].shapes[d][0] == doctest::Approx(a.shapes[d][0]).epsilon(0.10));
    CHECK(model.gds[0].shapes[d][1] == doctest::Approx(a.shapes[d][1]).epsilon(0.10));
    CHECK(model.gds[1].shapes[d][0] == doctest::Approx(b.shapes[d][0]).epsilon(0.10));
    CHECK(model.gds[1].shapes[d][1] == doctest::Approx(b.shapes[d][1]).epsilon(0.10));
  }
  CHECK(model.alphas[0] == doctest::Approx(5000.0 / 8000.0).epsilon(1e-12));
  CHECK(model.alphas[1] == doctest::Approx(3000.0 / 8000.0).epsilon(1e-12));
}

TEST_CASE("fit_generative equals fit with the variational parameters zeroed") {
  const Dataset data = two_class_gd(300, 37);
  FitConfig cfg;
  const DGDModel direct = fit_generative(data, cfg).first;
  FitConfig zero = cfg;
  zero.zero_variational = true;
  const DGDModel via_fit = fit(data, one_hot_targets(data), {}, zero).first;
  for (const auto& s : data.samples) {
    CHECK(direct.predict(s) == via_fit.predict(s));
  }
}

TEST_CASE("the recorded lower bound never exceeds the objective") {
  const Dataset data = two_class_gd(250, 53);
  FitConfig cfg;
  cfg.tol = 1e-7;
  cfg.max_iter = 15;
  const FitReport report = fit_labeled(data, cfg).second;
  REQUIRE(report.objective_trace.size() == report.phi_trace.size());
  for (std::size_t i = 0; i < report.phi_trace.size(); ++i) {
    CHECK(report.objective_trace[i] <= report.phi_trace[i] + 1e-9);
  }
}

TEST_CASE("fit is deterministic given data order and config") {
  const Dataset data = two_class_gd(200, 41);
  FitConfig cfg;
  const DGDModel m1 = fit_labeled(data, cfg).first;
  const DGDModel m2 = fit_labeled(data, cfg).first;
  REQUIRE(m1.class_count == m2.class_count);
  for (int c = 0; c < m1.class_count; ++c) {
    CHECK(m1.alphas[c] == m2.alphas[c]);
    for (int d = 0; d < m1.gds[c].dim(); ++d) {
      CHECK(m1.gds[c].shapes[d][0] == m2.gds[c].shapes[d][0]);
      CHECK(m1.gds[c].shapes[d][1] == m2.gds[c].shapes[d][1]);
    }
  }
}

TEST_CASE("predictions are invariant under a common rescaling of A") {
  std::mt19937_64 rng(43);
  DGDModel m1;
  m1.class_count = 2;
  m1.alphas = {0.4, 0.6};
  m1.scale = 1.0;
  m1.gds = {oracles::random_gd(rng, 2, 0.5, 12.0),
            oracles::random_gd(rng, 2, 0.5, 12.0)};
  DGDModel m2 = m1;
  const double factor = 3.5;
  m2.scale = factor;
  for (auto& gd : m2.gds) gd.scale = factor;
  for (int t = 0; t < 50; ++t) {
    CompositionalSample x = oracles::random_sample(rng, 3);
    CompositionalSample scaled = x;
    scaled.scale = factor;
    for (double& v : scaled.values) v *= factor;
    const std::vector<double> p1 = m1.posterior(x);
    const std::vector<double> p2 = m2.posterior(scaled);
    CHECK(p1[0] == doctest::Approx(p2[0]).epsilon(1e-10));
    CHECK(m1.predict(x) == m2.predict(scaled));
  }
}

TEST_CASE("results do not depend on the worker count") {
  const Dataset data = two_class_gd(400, 59);
  FitConfig cfg;
  setenv("SIMPLEX_THREADS", "1", 1);
  const DGDModel serial = fit_labeled(data, cfg).first;
  setenv("SIMPLEX_THREADS", "4", 1);
  const DGDModel threaded = fit_labeled(data, cfg).first;
  setenv("SIMPLEX_THREADS", "0", 1);
  for (int c = 0; c < 2; ++c) {
    CHECK(serial.alphas[c] == threaded.alphas[c]);
    for (int d = 0; d < 3; ++d) {
      CHECK(serial.gds[c].shapes[d][0] == threaded.gds[c].shapes[d][0]);
      CHECK(serial.gds[c].shapes[d][1] == threaded.gds[c].shapes[d][1]);
    }
  }
}

TEST_CASE("degenerate inputs raise the documented errors") {
  const Dataset data = two_class_gd(50, 47);
  FitConfig cfg;
  CHECK_THROWS_AS(fit(data, one_hot_targets(data),
                      std::vector<double>(data.size(), 0.0), cfg),
                  NoEffectiveData);
  FitConfig bad = cfg;
  bad.tol = 0.0;
  CHECK_THROWS_AS(fit_labeled(data, bad), OutOfRange);
}
