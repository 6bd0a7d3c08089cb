#pragma once

#include <cmath>
#include <string>

#include "dwr/types.hpp"

namespace dwr {

namespace detail {

inline Vector solve_normal_equations(const Matrix& gram, const Vector& rhs,
                                     bool ridge_fallback, double ridge_eps) {
  // LDLT reports success on semidefinite systems, so rank-deficiency is
  // detected from the spectrum instead. A consistent singular system would
  // otherwise slip through a residual check.
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
  bool deficient = es.info() != Eigen::Success ||
                   es.eigenvalues().minCoeff() <= 1e-12 * std::max(max_eig, 1.0);
  if (deficient && !ridge_fallback)
    throw SingularError("least squares: rank-deficient design");
  Matrix g = gram;
  if (deficient) g.diagonal().array() += ridge_eps;
  Vector beta = Eigen::LDLT<Matrix>(g).solve(rhs);
  if (!beta.allFinite())
    throw SingularError("least squares: non-finite solution");
  return beta;
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace detail

/// argmin_beta sum_i w_i (y_i - x_i beta)^2. Uniform weights give OLS.
inline Vector weighted_least_squares(const Dataset& ds, const WeightVector& w,
                                     bool ridge_fallback = false,
                                     double ridge_eps = 1e-8) {
  if (w.n() != ds.n())
    throw ContractError("weighted_least_squares: weight length != n");
  if (w.w.sum() <= 0.0)
    throw ContractError("weighted_least_squares: nonpositive weight sum");
  Matrix gram = ds.x.transpose() * w.w.asDiagonal() * ds.x;
  Vector rhs = ds.x.transpose() * (w.w.asDiagonal() * ds.y);
  return detail::solve_normal_equations(gram, rhs, ridge_fallback, ridge_eps);
}

namespace baselines {

inline Vector ols_fit(const Dataset& ds) {
  return weighted_least_squares(ds, WeightVector::uniform(ds.n()));
}

/// Coordinate descent for (1/2n)||y - x beta||^2 + lambda1 ||beta||_1.
/// The joint penalty term (IILasso) adds lambda2 |beta|' R |beta| with
/// R_jk = |r_jk| / (1 - |r_jk|), r_jk = (1/n) X_j' X_k, R_jj = 0.
inline Vector l1_coordinate_descent(const Dataset& ds, double lambda1,
                                    double lambda2, const Matrix* corr_penalty,
                                    int max_iters = 10000, double tol = 1e-10) {
  const auto n = ds.n();
  const auto p = ds.p();
  Matrix gram = ds.x.transpose() * ds.x / static_cast<double>(n);
  Vector xty = ds.x.transpose() * ds.y / static_cast<double>(n);
  Vector beta = Vector::Zero(p);
  Vector grad_cache = xty;  // xty - gram * beta, maintained incrementally

  for (int it = 0; it < max_iters; ++it) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      double rho = grad_cache[j] + gjj * beta[j];
      double thr = lambda1;
      if (corr_penalty) {
        double cross = 0.0;
        for (Eigen::Index k = 0; k < p; ++k)
          if (k != j) cross += (*corr_penalty)(j, k) * std::abs(beta[k]);
        thr += lambda2 * cross;
      }
      double nb = detail::soft_threshold(rho, thr) / gjj;
      double delta = nb - beta[j];
      if (delta != 0.0) {
        grad_cache -= gram.col(j) * delta;
        beta[j] = nb;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < tol) break;
  }
  return beta;
}

inline Vector lasso_fit(const Dataset& ds, double lambda1) {
  if (lambda1 < 0) throw ContractError("lasso_fit: negative lambda1");
  return l1_coordinate_descent(ds, lambda1, 0.0, nullptr);
}

/// Closed-form ridge with the squared penalty; set literal_norm for the
/// unsquared ||beta||_2 reading (solved by scalar iteration on the norm).
inline Vector ridge_fit(const Dataset& ds, double lambda1,
                        bool literal_norm = false) {
  if (lambda1 < 0) throw ContractError("ridge_fit: negative lambda1");
  Matrix gram = ds.x.transpose() * ds.x;
  Vector rhs = ds.x.transpose() * ds.y;
  if (!literal_norm) {
    Matrix g = gram;
    g.diagonal().array() += lambda1;
    return Eigen::LDLT<Matrix>(g).solve(rhs);
  }
  // ||beta||_2 penalty: beta = (X'X + lambda1/(2||beta||) I)^-1 X'y.
  double norm = 1.0;
  Vector beta = Vector::Zero(ds.p());
  for (int it = 0; it < 200; ++it) {
    Matrix g = gram;
    g.diagonal().array() += lambda1 / (2.0 * std::max(norm, 1e-12));
    beta = Eigen::LDLT<Matrix>(g).solve(rhs);
    double nn = beta.norm();
    if (std::abs(nn - norm) < 1e-12) break;
    norm = nn;
  }
  return beta;
}

inline Matrix iilasso_penalty_matrix(const Dataset& ds) {
  const double n = static_cast<double>(ds.n());
  Matrix r = (ds.x.transpose() * ds.x / n).cwiseAbs();
  Matrix pen(ds.p(), ds.p());
  for (Eigen::Index j = 0; j < ds.p(); ++j) {
    for (Eigen::Index k = 0; k < ds.p(); ++k) {
      if (j == k) {
        pen(j, k) = 0.0;
        continue;
      }
      if (r(j, k) >= 1.0)
        throw ContractError("iilasso_fit: degenerate correlation |r_jk| >= 1");
      pen(j, k) = r(j, k) / (1.0 - r(j, k));
    }
  }
  return pen;
}

inline Vector iilasso_fit(const Dataset& ds, double lambda1, double lambda2) {
  if (lambda1 < 0 || lambda2 < 0)
    throw ContractError("iilasso_fit: negative penalty");
  Matrix pen = iilasso_penalty_matrix(ds);
  return l1_coordinate_descent(ds, lambda1, lambda2, &pen);
}

}  // namespace baselines

}  // namespace dwr
