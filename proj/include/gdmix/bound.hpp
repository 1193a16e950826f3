#ifndef GDMIX_BOUND_HPP_
#define GDMIX_BOUND_HPP_

#include <Eigen/Core>
#include <vector>

#include "gdmix/gd.hpp"
#include "gdmix/types.hpp"

namespace gdmix {

// Natural-parameter view of component k of a GD mixture: the 2D shapes
// followed by the M-1 shared mixing logits eta_j = ln(alpha_j / alpha_M).
struct ExpFamComponent {
  std::vector<double> natural; // a_1, b_1, ..., a_D, b_D, eta_1, ..., eta_{M-1}
  int index = 0;               // k, 0-based
  int branches = 1;            // M
  double scale = 1.0;

  int dim() const {
    return (static_cast<int>(natural.size()) - (branches - 1)) / 2;
  }
};

ExpFamComponent make_component(const std::vector<double>& alphas,
                               const std::vector<GDParams>& comps, int k);

// Sufficient statistics of a sample for component k: (ln v_d, ln(A - v_d))
// pairs followed by the (M-1)-dim one-hot indicator of k (all zero for the
// last component).
std::vector<double> suff_stats(const std::vector<double>& v, double scale,
                               int k, int branches);

// Log-normalizer K of the component, its gradient and block Hessian.
double cumulant(const ExpFamComponent& comp);
std::vector<double> cumulant_grad(const ExpFamComponent& comp);

struct CumulantHessian {
  std::vector<Eigen::Matrix2d> shape_blocks; // one 2x2 block per dimension
  Eigen::MatrixXd logit_block;               // (M-1) x (M-1) softmax block
};
CumulantHessian cumulant_hess(const ExpFamComponent& comp);

// Inner product y' Omega with the shape coordinates of Omega shifted by one.
// This is the convention under which exp(suff' Omega - K) recovers
// alpha_k GD(x | mu_k) exactly.
double natural_dot(const std::vector<double>& y, const ExpFamComponent& comp);

// Sherman-Morrison closed-form inverses of the Hessian blocks. Throw
// SingularBlock when a rank-one denominator is within 1e-12 of zero; callers
// fall back to dense inversion.
Eigen::Matrix2d shape_block_inverse(double a, double b);
Eigen::MatrixXd logit_block_inverse(const Eigen::VectorXd& probs);
Eigen::Matrix2d newton_hessian_inverse(double r1, double r2, double e3,
                                       double a, double b);

// Reverse-Jensen scalar G on [0, 1/2]; nondecreasing, G(0) >= 0.
double g_function(double gamma);

namespace detail {
double g_function_scaled(double gamma, double g_scale);
}

// Minimum W keeping the variational point inside the gradient range of K.
double w_min(const std::vector<double>& xbar,
             const std::vector<double>& contact_grad, double contact_resp,
             int dim, int branches, double scale);

// Per-sample bound quantities for every component of one mixture.
struct VariationalState {
  std::vector<double> W;                   // per component
  std::vector<std::vector<double>> xddot;  // per component, 2D + M - 1
  double cst = 0.0;
  std::vector<double> contact_resp;        // responsibilities at the contact
  double contact_logmix = 0.0;
  // Contact snapshot, kept so the bound can be evaluated from parameter
  // differences (exact tangency at the contact point).
  std::vector<ExpFamComponent> contact;
  std::vector<double> contact_cumulant;
};

// Contact-point snapshot of a GD mixture with the per-component caches
// needed to build variational states; read-only after construction, safe to
// share across worker threads.
class MixtureBound {
 public:
  MixtureBound(std::vector<double> alphas, std::vector<GDParams> comps,
               double g_scale = 1.0);

  VariationalState state_for(const std::vector<double>& v) const;

  int components() const { return static_cast<int>(comps_.size()); }
  int dim() const { return comps_.empty() ? 0 : comps_.front().dim(); }
  double scale() const { return scale_; }
  const ExpFamComponent& component(int k) const { return natural_[k]; }
  const std::vector<double>& grad(int k) const { return grad_[k]; }

 private:
  std::vector<double> alphas_;
  std::vector<GDParams> comps_;
  std::vector<ExpFamComponent> natural_;
  std::vector<double> cumulant_;                       // K at contact
  std::vector<std::vector<double>> grad_;              // K' at contact
  std::vector<std::vector<Eigen::Matrix2d>> shape_inv_; // per comp, per dim
  Eigen::MatrixXd logit_inv_;                          // shared softmax block
  std::vector<double> log_alpha_;
  std::vector<std::vector<double>> shape_coeff_;       // (a_d-1, b_d-1) pairs
  std::vector<double> log_norm_;                       // density normalizers
  double scale_ = 1.0;
  double g_scale_ = 1.0;
};

// Exact log sum_k alpha_k GD(x | mu_k) in the independence coordinates.
double log_mixture(const std::vector<double>& alphas,
                   const std::vector<GDParams>& comps,
                   const std::vector<double>& v);

// Variational states for one sample at a contact snapshot.
VariationalState compute_variational(const std::vector<double>& v,
                                     const std::vector<double>& contact_alphas,
                                     const std::vector<GDParams>& contact_comps);

// Bound evaluated at arbitrary mixture parameters:
// sum_k -W_k (xddot_k' Omega_k - K(Omega_k)) + cst.
double upper_bound_value(const VariationalState& state,
                         const std::vector<double>& alphas,
                         const std::vector<GDParams>& comps);

// z = K''^{-1/2} (xbar - K') via per-block symmetric eigendecompositions.
std::vector<double> variational_z(const std::vector<double>& xbar,
                                  const ExpFamComponent& contact);

} // namespace gdmix

#endif // GDMIX_BOUND_HPP_
