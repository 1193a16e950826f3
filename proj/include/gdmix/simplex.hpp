#ifndef GDMIX_SIMPLEX_HPP_
#define GDMIX_SIMPLEX_HPP_

#include <Eigen/Core>
#include <vector>

#include "gdmix/types.hpp"

namespace gdmix {

// Independence coordinates of a sample: v_1 = x_1 and
// v_d = A * x_d / (A - sum_{l<d} x_l), each in (0, A).
struct VTransformed {
  std::vector<double> v;
  double scale = 1.0;
};

// Throws NonPositiveComponent / SumMismatch when the sample leaves the open
// scaled simplex.
void validate(const CompositionalSample& sample);

// Replaces zero entries by 1e-4 * A, then rescales the vector to sum
// exactly to A. Input entries must be nonnegative and not all zero.
CompositionalSample zero_replace(const std::vector<double>& raw, double scale);

VTransformed v_transform(const CompositionalSample& sample);
std::vector<double> v_transform_values(const std::vector<double>& x, double scale);
CompositionalSample v_inverse(const VTransformed& vt);

// Rows 2..D+1 of the (D+1)x(D+1) Helmert matrix: orthonormal rows, each
// orthogonal to the all-ones vector.
Eigen::MatrixXd helmert_submatrix(int dim);

// u_alpha: closure of the componentwise power x_d^alpha.
std::vector<double> power_transform(const std::vector<double>& x, double alpha);

// z_alpha = H * ((D+1) u_alpha(x) - 1) / alpha, mapping the unit simplex to
// unconstrained D-space; tends to the isometric log-ratio as alpha -> 0.
std::vector<double> alpha_transform(const std::vector<double>& x, double alpha);

// UCI-style pipeline: drop columns with <= 2 distinct values, standardize,
// min-max rescale to [0,1], row-normalize to the unit simplex, zero-replace.
Dataset preprocess_uci(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels, int class_count);

} // namespace gdmix

#endif // GDMIX_SIMPLEX_HPP_
