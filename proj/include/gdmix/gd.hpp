#ifndef GDMIX_GD_HPP_
#define GDMIX_GD_HPP_

#include <array>
#include <random>
#include <vector>

#include "gdmix/simplex.hpp"
#include "gdmix/types.hpp"

namespace gdmix {

// Shape pairs (a_d, b_d) of a scaled Generalized Dirichlet.
struct GDParams {
  std::vector<std::array<double, 2>> shapes;
  double scale = 1.0;

  int dim() const { return static_cast<int>(shapes.size()); }
};

// gamma_d = b_d - (a_{d+1} + b_{d+1}) for d < D, gamma_D = b_D - 1;
// recomputed from the shapes, never stored. d is 0-based.
double gamma_exponent(const GDParams& params, int d);

// Elementwise log of the shape pairs, the coordinates the Newton updates
// move in.
struct LogXi {
  std::vector<std::array<double, 2>> xi;
  double scale = 1.0;

  static LogXi from_params(const GDParams& params);
  GDParams to_params() const;
};

// log of the scaled Beta density v^{a-1} (A-v)^{b-1} / (A^{a+b-1} B(a,b)).
double log_scaled_beta(double v, double a, double b, double scale);

// Log density in the independence coordinates: sum_d log Beta_A(v_d|a_d,b_d).
double log_density_v(const GDParams& params, const std::vector<double>& v);
double log_density(const GDParams& params, const CompositionalSample& sample);

// Draws v_d ~ A * Beta(a_d, b_d) independently and reconstructs x.
CompositionalSample sample(const GDParams& params, std::mt19937_64& rng);

struct MomentInit {
  GDParams params;
  bool degenerate = false; // some dimension fell back to (1, 1)
};

// Weighted moment-method estimate from v-space rows; empty weights = uniform.
// Dimensions with zero or super-Bernoulli variance fall back to (1, 1).
MomentInit moment_init_v(const std::vector<std::vector<double>>& v_rows,
                         double scale, const std::vector<double>& weights);
MomentInit moment_init(const Dataset& data, const std::vector<double>& weights);

} // namespace gdmix

#endif // GDMIX_GD_HPP_
