#include "gdmix/gd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gdmix {

namespace {

double clamp_shape(double s) { return std::clamp(s, kShapeMin, kShapeMax); }

void check_params(const GDParams& params) {
  if (!(params.scale > 0.0)) throw OutOfRange("scale must be positive");
  for (const auto& p : params.shapes) {
    if (!(p[0] > 0.0) || !(p[1] > 0.0)) {
      throw OutOfRange("shape parameters must be positive");
    }
  }
}

} // namespace

LogXi LogXi::from_params(const GDParams& params) {
  check_params(params);
  LogXi out;
  out.scale = params.scale;
  out.xi.reserve(params.shapes.size());
  for (const auto& p : params.shapes) {
    out.xi.push_back({std::log(p[0]), std::log(p[1])});
  }
  return out;
}

GDParams LogXi::to_params() const {
  GDParams out;
  out.scale = scale;
  out.shapes.reserve(xi.size());
  for (const auto& p : xi) {
    out.shapes.push_back({std::exp(p[0]), std::exp(p[1])});
  }
  return out;
}

double gamma_exponent(const GDParams& params, int d) {
  const int dim = params.dim();
  if (d < 0 || d >= dim) throw OutOfRange("dimension index out of range");
  if (d == dim - 1) return params.shapes[d][1] - 1.0;
  return params.shapes[d][1] - (params.shapes[d + 1][0] + params.shapes[d + 1][1]);
}

double log_scaled_beta(double v, double a, double b, double scale) {
  const double log_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b) +
                          (a + b - 1.0) * std::log(scale);
  return (a - 1.0) * std::log(v) + (b - 1.0) * std::log(scale - v) - log_norm;
}

double log_density_v(const GDParams& params, const std::vector<double>& v) {
  if (static_cast<int>(v.size()) != params.dim()) {
    throw DimensionMismatch("v has " + std::to_string(v.size()) +
                            " entries, params have " +
                            std::to_string(params.dim()));
  }
  double sum = 0.0;
  for (std::size_t d = 0; d < v.size(); ++d) {
    sum += log_scaled_beta(v[d], params.shapes[d][0], params.shapes[d][1],
                           params.scale);
  }
  return sum;
}

double log_density(const GDParams& params, const CompositionalSample& sample) {
  if (sample.dim() != params.dim()) {
    throw DimensionMismatch("sample dimension " + std::to_string(sample.dim()) +
                            " does not match params " +
                            std::to_string(params.dim()));
  }
  if (sample.scale != params.scale) {
    throw DimensionMismatch("sample and params scales differ");
  }
  return log_density_v(params, v_transform(sample).v);
}

CompositionalSample sample(const GDParams& params, std::mt19937_64& rng) {
  check_params(params);
  const double a_scale = params.scale;
  VTransformed vt;
  vt.scale = a_scale;
  vt.v.resize(params.dim());
  for (int d = 0; d < params.dim(); ++d) {
    std::gamma_distribution<double> ga(params.shapes[d][0], 1.0);
    std::gamma_distribution<double> gb(params.shapes[d][1], 1.0);
    const double u = ga(rng);
    const double w = gb(rng);
    double beta = u / (u + w);
    // keep strictly inside (0, A) so downstream logs stay finite
    beta = std::clamp(beta, 1e-12, 1.0 - 1e-12);
    vt.v[d] = a_scale * beta;
  }
  return v_inverse(vt);
}

MomentInit moment_init_v(const std::vector<std::vector<double>>& v_rows,
                         double scale, const std::vector<double>& weights) {
  if (v_rows.empty()) throw NoEffectiveData("no samples");
  const std::size_t dim = v_rows.front().size();
  const std::size_t n = v_rows.size();
  std::vector<double> w(weights);
  if (w.empty()) w.assign(n, 1.0);
  if (w.size() != n) throw DimensionMismatch("weights size mismatch");
  double wsum = 0.0;
  for (double x : w) {
    if (x < 0.0) throw OutOfRange("weights must be nonnegative");
    wsum += x;
  }
  if (!(wsum > 0.0)) throw NoEffectiveData("all weights are zero");

  MomentInit out;
  out.params.scale = scale;
  out.params.shapes.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += w[i] * v_rows[i][d] / scale;
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = v_rows[i][d] / scale - mean;
      var += w[i] * diff * diff;
    }
    var /= wsum;
    const double bernoulli = mean * (1.0 - mean);
    // the lower guard absorbs accumulation noise on constant columns
    if (!(var > bernoulli * 1e-14) || var >= bernoulli) {
      out.params.shapes[d] = {1.0, 1.0};
      out.degenerate = true;
      continue;
    }
    const double common = bernoulli / var - 1.0;
    out.params.shapes[d] = {clamp_shape(mean * common),
                            clamp_shape((1.0 - mean) * common)};
  }
  return out;
}

MomentInit moment_init(const Dataset& data, const std::vector<double>& weights) {
  std::vector<std::vector<double>> v_rows;
  v_rows.reserve(data.samples.size());
  for (const auto& s : data.samples) v_rows.push_back(v_transform(s).v);
  return moment_init_v(v_rows, data.scale(), weights);
}

} // namespace gdmix
