#pragma once

#include <cmath>
#include <string>

#include "dwr/types.hpp"

namespace dwr {

namespace detail {

// Weighted cross-moment residuals c_jk = (X_j' diag(w) X_k)/n - (X_j'w/n)(X_k'w/n).
// The decorrelation loss sums c_jk^2 over j and all k != j, which counts each
// unordered pair twice.
inline Matrix cross_moment_residuals(const Matrix& x, const Vector& w) {
  const double n = static_cast<double>(x.rows());
  Matrix second = x.transpose() * w.asDiagonal() * x / n;
  Vector first = x.transpose() * w / n;
  return second - first * first.transpose();
}

inline void check_dims(const Matrix& x, const Vector& w) {
  if (w.size() != x.rows())
    throw ContractError("decorrelation: weight length " +
                        std::to_string(w.size()) + " != n " +
                        std::to_string(x.rows()));
  if (!x.allFinite() || !w.allFinite())
    throw ContractError("decorrelation: non-finite input");
}

}  // namespace detail

/// Loss measuring pairwise weighted correlation of the columns of x.
/// Zero exactly when every pair of columns has matching weighted
/// cross-moment and product of weighted means.
inline double decorrelation_loss(const Matrix& x, const WeightVector& w) {
  detail::check_dims(x, w.w);
  Matrix c = detail::cross_moment_residuals(x, w.w);
  c.diagonal().setZero();
  return c.squaredNorm();
}

/// Analytic gradient of decorrelation_loss with respect to the weights.
inline Vector decorrelation_gradient(const Matrix& x, const WeightVector& w) {
  detail::check_dims(x, w.w);
  const double n = static_cast<double>(x.rows());
  Matrix c = detail::cross_moment_residuals(x, w.w);
  c.diagonal().setZero();
  Vector m = x.transpose() * w.w / n;

  // d c_jk / d w_i = (x_ij x_ik - x_ij m_k - m_j x_ik) / n, and each pair
  // appears twice in the loss.
  Matrix xc = x * c;                                  // n x p
  Vector grad = (xc.array() * x.array()).rowwise().sum();  // sum_jk x_ij c_jk x_ik
  grad -= 2.0 * (xc * m);                             // the two mean terms
  return 2.0 * grad / n;
}

/// Objective for the standalone weight learner: decorrelation loss plus the
/// variance and sum penalties.
inline double weight_objective(const Matrix& x, const WeightVector& w,
                               const HyperParams& hp) {
  const double n = static_cast<double>(x.rows());
  double sum_pen = w.w.mean() - 1.0;
  return decorrelation_loss(x, w) + hp.lambda3 / n * w.w.squaredNorm() +
         hp.lambda4 * sum_pen * sum_pen;
}

inline Vector weight_objective_gradient(const Matrix& x, const WeightVector& w,
                                        const HyperParams& hp) {
  const double n = static_cast<double>(x.rows());
  Vector g = decorrelation_gradient(x, w);
  g += 2.0 * hp.lambda3 / n * w.w;
  g.array() += 2.0 * hp.lambda4 / n * (w.w.mean() - 1.0);
  return g;
}

namespace detail {

inline void project_weights(Vector& w, const std::optional<double>& cap) {
  w = w.cwiseMax(0.0);
  if (cap) w = w.cwiseMin(*cap);
}

}  // namespace detail

/// Projected gradient descent on weight_objective starting from uniform
/// weights. Uses backtracking on the step size, so the terminal objective
/// never exceeds the uniform-weight value.
inline WeightVector learn_weights(const Matrix& x, const HyperParams& hp) {
  hp.validate();
  if (x.rows() < x.cols())
    throw ContractError("learn_weights: need n >= p");
  const auto n = x.rows();
  WeightVector w = WeightVector::uniform(n);
  double obj = weight_objective(x, w, hp);
  double step = hp.lr_w * static_cast<double>(n);

  int stall = 0;
  for (int it = 0; it < hp.max_iters; ++it) {
    Vector g = weight_objective_gradient(x, w, hp);
    WeightVector trial;
    double new_obj = obj;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      trial.w = w.w - step * g;
      detail::project_weights(trial.w, hp.weight_cap);
      new_obj = weight_objective(x, trial, hp);
      if (!std::isfinite(new_obj))
        throw DivergedError("learn_weights: non-finite objective at iteration " +
                            std::to_string(it));
      if (new_obj <= obj) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction at machine precision
    double rel = (obj - new_obj) / std::max(std::abs(obj), 1e-12);
    w = trial;
    obj = new_obj;
    step *= 1.2;
    stall = rel < hp.tol ? stall + 1 : 0;
    if (stall >= 5) break;
  }
  w.validate(hp.weight_cap);
  return w;
}

}  // namespace dwr
