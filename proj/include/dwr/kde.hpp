#pragma once

#include <cmath>
#include <numbers>

#include "dwr/types.hpp"

namespace dwr {

struct KdeWeights {
  WeightVector weights;
  bool floored = false;  // true if any joint density hit the epsilon floor
};

/// Per-coordinate Silverman bandwidths for the product-kernel estimators.
inline Vector silverman_bandwidths(const Matrix& x) {
  const double n = static_cast<double>(x.rows());
  const double p = static_cast<double>(x.cols());
  const double scale = std::pow(4.0 / ((p + 2.0) * n), 1.0 / (p + 4.0));
  Vector h(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Vector col = x.col(j);
    double sd = std::sqrt((col.array() - col.mean()).square().sum() /
                          (n - 1.0));
    h[j] = scale * sd;
  }
  return h;
}

/// Density-ratio weights W*_i = prod_j fhat_j(x_ij) / fhat(x_i,) built from
/// Gaussian product kernels, rescaled to mean 1. These drive the
/// decorrelation loss toward zero as n grows.
inline KdeWeights kde_oracle_weights(const Matrix& x, const Vector& bandwidths,
                                     double epsilon = 1e-300) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (bandwidths.size() != p)
    throw ContractError("kde_oracle_weights: bandwidth length != p");
  if ((bandwidths.array() <= 0.0).any())
    throw ContractError(
        "kde_oracle_weights: nonpositive bandwidth (constant column?)");

  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  // Scaled kernel arguments u_ij = x_ij / h_j, shared by both estimators.
  Matrix u = x.array().rowwise() / bandwidths.transpose().array();

  Vector log_marginal_prod = Vector::Zero(n);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        double d = u(k, j) - u(i, j);
        s += std::exp(-0.5 * d * d);
      }
      double f = inv_sqrt2pi * s / (static_cast<double>(n) * bandwidths[j]);
      log_marginal_prod[i] += std::log(std::max(f, epsilon));
    }
  }

  const double joint_norm =
      std::pow(inv_sqrt2pi, static_cast<double>(p)) /
      (static_cast<double>(n) * bandwidths.prod());
  KdeWeights out;
  out.weights.w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      double q = (u.row(k) - u.row(i)).squaredNorm();
      s += std::exp(-0.5 * q);
    }
    double joint = joint_norm * s;
    if (joint < epsilon) {
      joint = epsilon;
      out.floored = true;
    }
    out.weights.w[i] = std::exp(log_marginal_prod[i] - std::log(joint));
  }
  out.weights.w *= static_cast<double>(n) / out.weights.w.sum();
  return out;
}

inline KdeWeights kde_oracle_weights(const Matrix& x) {
  return kde_oracle_weights(x, silverman_bandwidths(x));
}

}  // namespace dwr
