#pragma once

#include <cmath>
#include <string>

#include "dwr/decorrelation.hpp"
#include "dwr/regression.hpp"
#include "dwr/types.hpp"

namespace dwr {

/// Joint objective: mean weighted squared loss, L1 on beta, decorrelation
/// penalty, and the weight variance/sum penalties.
///   J = (1/2n) sum_i w_i (y_i - x_i beta)^2 + lambda1 |beta|_1
///     + lambda2 L_B + (lambda3/n) sum w_i^2 + lambda4 (mean(w) - 1)^2
inline double total_objective(const Dataset& ds, const WeightVector& w,
                              const Vector& beta, const HyperParams& hp) {
  if (w.n() != ds.n() || beta.size() != ds.p())
    throw ContractError("total_objective: dimension mismatch");
  const double n = static_cast<double>(ds.n());
  Vector resid = ds.y - ds.x * beta;
  double fit = 0.5 / n * (w.w.array() * resid.array().square()).sum();
  double sum_pen = w.w.mean() - 1.0;
  return fit + hp.lambda1 * beta.lpNorm<1>() +
         hp.lambda2 * decorrelation_loss(ds.x, w) +
         hp.lambda3 / n * w.w.squaredNorm() + hp.lambda4 * sum_pen * sum_pen;
}

namespace detail {

inline Vector joint_weight_gradient(const Dataset& ds, const WeightVector& w,
                                    const Vector& beta, const HyperParams& hp) {
  const double n = static_cast<double>(ds.n());
  Vector resid = ds.y - ds.x * beta;
  Vector g = 0.5 / n * resid.array().square().matrix();
  g += hp.lambda2 * decorrelation_gradient(ds.x, w);
  g += 2.0 * hp.lambda3 / n * w.w;
  g.array() += 2.0 * hp.lambda4 / n * (w.w.mean() - 1.0);
  return g;
}

inline double lipschitz_estimate(const Dataset& ds, const WeightVector& w) {
  Matrix gram = ds.x.transpose() * w.w.asDiagonal() * ds.x /
                static_cast<double>(ds.n());
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace detail

/// Alternating solver: one projected gradient step on the weights and one
/// proximal (soft-threshold) gradient step on beta per iteration, starting
/// from uniform weights and beta = 0.
inline FitResult dwr_fit(const Dataset& ds, const HyperParams& hp,
                         bool freeze_weights = false) {
  ds.validate();
  hp.validate();
  const auto n = ds.n();

  FitResult fr;
  fr.weights = WeightVector::uniform(n);
  fr.beta = Vector::Zero(ds.p());
  double obj = total_objective(ds, fr.weights, fr.beta, hp);
  fr.loss_trace.push_back(obj);

  double step_w = hp.lr_w * static_cast<double>(n);
  double lip = detail::lipschitz_estimate(ds, fr.weights);
  int stall = 0;

  for (int it = 0; it < hp.max_iters; ++it) {
    if (!freeze_weights) {
      Vector g = detail::joint_weight_gradient(ds, fr.weights, fr.beta, hp);
      for (int bt = 0; bt < 40; ++bt) {
        WeightVector trial{fr.weights.w - step_w * g};
        detail::project_weights(trial.w, hp.weight_cap);
        double new_obj = total_objective(ds, trial, fr.beta, hp);
        if (!std::isfinite(new_obj))
          throw DivergedError("dwr_fit: non-finite objective at iteration " +
                              std::to_string(it));
        if (new_obj <= obj) {
          fr.weights = trial;
          obj = new_obj;
          step_w *= 1.2;
          break;
        }
        step_w *= 0.5;
      }
    }

    if (it % 50 == 0 && !freeze_weights)
      lip = detail::lipschitz_estimate(ds, fr.weights);
    double step_b = hp.lr_beta > 0 ? hp.lr_beta : 1.0 / std::max(lip, 1e-12);
    Vector resid = ds.y - ds.x * fr.beta;
    Vector grad_b = -ds.x.transpose() * (fr.weights.w.asDiagonal() * resid) /
                    static_cast<double>(n);
    Vector nb = fr.beta - step_b * grad_b;
    for (Eigen::Index j = 0; j < nb.size(); ++j)
      nb[j] = detail::soft_threshold(nb[j], step_b * hp.lambda1);
    fr.beta = nb;

    obj = total_objective(ds, fr.weights, fr.beta, hp);
    if (!std::isfinite(obj))
      throw DivergedError("dwr_fit: non-finite objective at iteration " +
                          std::to_string(it));
    fr.loss_trace.push_back(obj);
    fr.iters_used = it + 1;

    double prev = fr.loss_trace[fr.loss_trace.size() - 2];
    double rel = std::abs(prev - obj) / std::max(std::abs(prev), 1e-12);
    stall = rel < hp.tol ? stall + 1 : 0;
    if (stall >= 5) {
      fr.converged = true;
      break;
    }
  }
  return fr;
}

}  // namespace dwr
