#include "gdmix/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>

namespace gdmix {

void Dataset::check_consistent() const {
  if (samples.empty()) return;
  const int p = samples.front().parts();
  const double a = samples.front().scale;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].parts() != p) {
      throw DimensionMismatch("sample " + std::to_string(n) +
                              " has parts " + std::to_string(samples[n].parts()) +
                              ", expected " + std::to_string(p));
    }
    if (samples[n].scale != a) {
      throw DimensionMismatch("sample " + std::to_string(n) +
                              " has a different scale");
    }
    if (samples[n].label) {
      const int y = *samples[n].label;
      if (y < 0 || y >= class_count) {
        throw OutOfRange("label " + std::to_string(y) + " outside [0, " +
                         std::to_string(class_count) + ")");
      }
    }
  }
}

void validate(const CompositionalSample& sample) {
  const double a = sample.scale;
  if (!(a > 0.0)) throw OutOfRange("scale must be positive");
  if (sample.parts() < 2) throw DimensionMismatch("need at least two parts");
  double sum = 0.0;
  for (std::size_t d = 0; d < sample.values.size(); ++d) {
    const double x = sample.values[d];
    if (!(x > 0.0) || !(x < a)) {
      throw NonPositiveComponent("component " + std::to_string(d) + " = " +
                                 std::to_string(x) + " outside (0, A)");
    }
    sum += x;
  }
  if (std::abs(sum - a) > kSumTolerance * a) {
    throw SumMismatch("components sum to " + std::to_string(sum) +
                      ", expected " + std::to_string(a) + " (deviation " +
                      std::to_string(sum - a) + ")");
  }
}

CompositionalSample zero_replace(const std::vector<double>& raw, double scale) {
  if (raw.size() < 2) throw DimensionMismatch("need at least two entries");
  if (!(scale > 0.0)) throw OutOfRange("scale must be positive");
  double max_entry = 0.0;
  for (std::size_t d = 0; d < raw.size(); ++d) {
    if (raw[d] < 0.0) {
      throw NonPositiveComponent("entry " + std::to_string(d) + " is negative");
    }
    max_entry = std::max(max_entry, raw[d]);
  }
  if (max_entry == 0.0) throw AllZeroInput("all entries are zero");

  CompositionalSample out;
  out.scale = scale;
  out.values = raw;
  double sum = 0.0;
  for (double& x : out.values) {
    if (x == 0.0) x = kZeroReplacement * scale;
    sum += x;
  }
  for (double& x : out.values) x *= scale / sum;
  return out;
}

VTransformed v_transform(const CompositionalSample& sample) {
  validate(sample);
  return VTransformed{v_transform_values(sample.values, sample.scale),
                      sample.scale};
}

std::vector<double> v_transform_values(const std::vector<double>& x,
                                       double scale) {
  const int dim = static_cast<int>(x.size()) - 1;
  std::vector<double> v(dim);
  double remainder = scale;
  for (int d = 0; d < dim; ++d) {
    if (!(remainder > 0.0)) {
      throw DegenerateRemainder("non-positive remainder at dimension " +
                                std::to_string(d));
    }
    v[d] = scale * x[d] / remainder;
    remainder -= x[d];
  }
  return v;
}

CompositionalSample v_inverse(const VTransformed& vt) {
  const double a = vt.scale;
  CompositionalSample out;
  out.scale = a;
  out.values.resize(vt.v.size() + 1);
  double remainder = a;
  for (std::size_t d = 0; d < vt.v.size(); ++d) {
    if (!(vt.v[d] > 0.0) || !(vt.v[d] < a)) {
      throw OutOfRange("v[" + std::to_string(d) + "] outside (0, A)");
    }
    out.values[d] = vt.v[d] * remainder / a;
    remainder -= out.values[d];
  }
  if (!(remainder > 0.0)) {
    throw DegenerateRemainder("no mass left for the last component");
  }
  out.values.back() = remainder;
  return out;
}

Eigen::MatrixXd helmert_submatrix(int dim) {
  if (dim < 1) throw OutOfRange("dimension must be >= 1");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim + 1);
  for (int i = 1; i <= dim; ++i) {
    const double norm = 1.0 / std::sqrt(static_cast<double>(i) * (i + 1));
    for (int j = 0; j < i; ++j) h(i - 1, j) = norm;
    h(i - 1, i) = -static_cast<double>(i) * norm;
  }
  return h;
}

std::vector<double> power_transform(const std::vector<double>& x, double alpha) {
  if (!(alpha > 0.0)) throw NonPositiveAlpha("alpha must be positive");
  std::vector<double> u(x.size());
  double sum = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (!(x[d] > 0.0)) {
      throw NonPositiveComponent("component " + std::to_string(d) +
                                 " must be positive");
    }
    u[d] = std::pow(x[d], alpha);
    sum += u[d];
  }
  for (double& e : u) e /= sum;
  return u;
}

std::vector<double> alpha_transform(const std::vector<double>& x, double alpha) {
  const int parts = static_cast<int>(x.size());
  const std::vector<double> u = power_transform(x, alpha);
  const Eigen::MatrixXd h = helmert_submatrix(parts - 1);
  Eigen::VectorXd w(parts);
  for (int d = 0; d < parts; ++d) w[d] = (parts * u[d] - 1.0) / alpha;
  const Eigen::VectorXd z = h * w;
  return std::vector<double>(z.data(), z.data() + z.size());
}

Dataset preprocess_uci(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels, int class_count) {
  if (rows.empty()) throw EmptyAfterFiltering("no rows");
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionMismatch("ragged table");
  }

  // Columns with <= 2 distinct values count as binary and are dropped.
  std::vector<int> keep;
  for (std::size_t c = 0; c < cols; ++c) {
    std::set<double> distinct;
    for (const auto& r : rows) {
      distinct.insert(r[c]);
      if (distinct.size() > 2) break;
    }
    if (distinct.size() > 2) keep.push_back(static_cast<int>(c));
  }
  if (keep.size() < 2) {
    throw EmptyAfterFiltering("fewer than two non-binary columns remain");
  }

  const std::size_t n = rows.size();
  std::vector<std::vector<double>> work(n, std::vector<double>(keep.size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < keep.size(); ++c) work[i][c] = rows[i][keep[c]];
  }

  for (std::size_t c = 0; c < keep.size(); ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += work[i][c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = work[i][c] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      work[i][c] = (work[i][c] - mean) / sd;
      lo = std::min(lo, work[i][c]);
      hi = std::max(hi, work[i][c]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      work[i][c] = (work[i][c] - lo) / (hi - lo);
    }
  }

  Dataset out;
  out.class_count = class_count;
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Row-normalize to the unit simplex before replacing zeros, so the
    // replacement value is 1e-4 of the final scale.
    double row_sum = 0.0;
    for (double x : work[i]) row_sum += x;
    if (row_sum == 0.0) {
      throw AllZeroInput("row " + std::to_string(i) + " is all zero");
    }
    for (double& x : work[i]) x /= row_sum;
    CompositionalSample s = zero_replace(work[i], 1.0);
    if (!labels.empty()) s.label = labels[i];
    out.samples.push_back(std::move(s));
  }
  out.check_consistent();
  return out;
}

} // namespace gdmix
