#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "dwr/types.hpp"

namespace dwr {

struct MetricsReport {
  std::map<std::string, double> per_env_rmse;
  double average_error = 0.0;
  double stability_error = 0.0;
  double beta_error_s = 0.0;
  double beta_error_v = 0.0;
};

inline double rmse(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.size() < 1)
    throw ContractError("rmse: length mismatch");
  return std::sqrt((y_true - y_pred).squaredNorm() /
                   static_cast<double>(y_true.size()));
}

/// L1 error of the coefficients, restricted to the given columns (empty set
/// means all columns).
inline double beta_error(const Vector& beta_hat, const Vector& beta_true,
                         const IndexSet& cols = {}) {
  if (beta_hat.size() != beta_true.size())
    throw ContractError("beta_error: length mismatch");
  if (cols.empty()) return (beta_hat - beta_true).lpNorm<1>();
  double e = 0.0;
  for (auto j : cols) e += std::abs(beta_hat[j] - beta_true[j]);
  return e;
}

/// Mean and sample standard deviation of per-environment RMSE.
inline std::pair<double, double> stability_metrics(
    const std::vector<double>& per_env_rmse) {
  const auto m = per_env_rmse.size();
  if (m < 2)
    throw ContractError("stability_metrics: need at least two environments");
  double avg = 0.0;
  for (double r : per_env_rmse) avg += r;
  avg /= static_cast<double>(m);
  double ss = 0.0;
  for (double r : per_env_rmse) ss += (r - avg) * (r - avg);
  return {avg, std::sqrt(ss / static_cast<double>(m - 1))};
}

/// Pearson correlation matrix of the columns of x, optionally under the
/// probability measure w / sum(w).
inline Matrix pearson_matrix(const Matrix& x, const WeightVector* w = nullptr) {
  const auto n = x.rows();
  const auto p = x.cols();
  Vector probs;
  if (w) {
    if (w->n() != n) throw ContractError("pearson_matrix: weight length != n");
    if (w->w.sum() <= 0)
      throw ContractError("pearson_matrix: nonpositive weight sum");
    probs = w->w / w->w.sum();
  } else {
    probs = Vector::Constant(n, 1.0 / static_cast<double>(n));
  }
  Vector means = x.transpose() * probs;
  Matrix centered = x.rowwise() - means.transpose();
  Matrix cov = centered.transpose() * probs.asDiagonal() * centered;
  Matrix corr(p, p);
  Vector second_moment = (x.array().square().matrix()).transpose() * probs;
  for (Eigen::Index j = 0; j < p; ++j) {
    // relative to the raw second moment, so constant columns are caught even
    // when centering leaves rounding dust
    if (cov(j, j) <= 1e-12 * std::max(second_moment[j], 1e-300))
      throw ContractError("pearson_matrix: zero-variance column " +
                          std::to_string(j));
  }
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k)
      corr(j, k) = cov(j, k) / std::sqrt(cov(j, j) * cov(k, k));
  return corr;
}

inline double max_offdiagonal_abs(const Matrix& corr) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < corr.rows(); ++j)
    for (Eigen::Index k = 0; k < corr.cols(); ++k)
      if (j != k) m = std::max(m, std::abs(corr(j, k)));
  return m;
}

/// L1 distance between per-environment covariate mean vectors.
inline double distribution_distance(const Matrix& x_i, const Matrix& x_j) {
  if (x_i.cols() != x_j.cols())
    throw ContractError("distribution_distance: column-count mismatch");
  Vector mi = x_i.colwise().mean();
  Vector mj = x_j.colwise().mean();
  return (mi - mj).lpNorm<1>();
}

struct OmittedVariableDiagnostics {
  Vector cross_vg;  // (1/n) sum_i w_i V_i g(S_i), one entry per unstable col
  Matrix cross_vs;  // (1/n) sum_i w_i V_i' S_i
};

/// The two cross-moments that drive omitted-variable bias. Both should
/// shrink under decorrelating weights.
inline OmittedVariableDiagnostics omitted_variable_diagnostics(
    const Dataset& ds, const WeightVector* w = nullptr) {
  if (!ds.truth || ds.truth->nonlinear_term.size() != ds.n())
    throw ContractError("omitted_variable_diagnostics: ground truth unavailable");
  const auto& gt = *ds.truth;
  const double n = static_cast<double>(ds.n());
  Vector weights = w ? w->w : Vector::Ones(ds.n());
  if (weights.size() != ds.n())
    throw ContractError("omitted_variable_diagnostics: weight length != n");

  const auto pv = static_cast<Eigen::Index>(gt.unstable_cols.size());
  const auto ps = static_cast<Eigen::Index>(gt.stable_cols.size());
  Matrix v(ds.n(), pv), s(ds.n(), ps);
  for (Eigen::Index k = 0; k < pv; ++k) v.col(k) = ds.x.col(gt.unstable_cols[k]);
  for (Eigen::Index k = 0; k < ps; ++k) s.col(k) = ds.x.col(gt.stable_cols[k]);

  OmittedVariableDiagnostics d;
  d.cross_vg = v.transpose() * (weights.asDiagonal() * gt.nonlinear_term) / n;
  d.cross_vs = v.transpose() * weights.asDiagonal() * s / n;
  return d;
}

}  // namespace dwr
