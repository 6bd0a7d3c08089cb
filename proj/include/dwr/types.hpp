#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<Eigen::Index>;

/// Thrown when an input violates a documented precondition.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative solver produces non-finite values.
struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when biased selection cannot reach the requested sample count.
struct StarvationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a linear system is singular and no fallback is enabled.
struct SingularError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GroundTruth {
  IndexSet stable_cols;
  IndexSet unstable_cols;
  IndexSet biased_cols;
  Vector beta_true;
  Vector nonlinear_term;  // per-sample g(S)
  Vector f_values;        // per-sample f(S) = S*beta_s + g(S)
};

struct Dataset {
  Matrix x;
  Vector y;
  std::vector<std::string> feature_names;
  std::optional<GroundTruth> truth;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }

  void validate() const {
    if (x.rows() < 2 || x.cols() < 2)
      throw ContractError("Dataset: need n >= 2 and p >= 2");
    if (!x.allFinite() || (y.size() > 0 && !y.allFinite()))
      throw ContractError("Dataset: non-finite entries");
    if (!feature_names.empty() &&
        feature_names.size() != static_cast<size_t>(x.cols()))
      throw ContractError("Dataset: feature_names length != p");
  }
};

struct WeightVector {
  Vector w;

  Eigen::Index n() const { return w.size(); }
  double mean() const { return w.size() ? w.mean() : 0.0; }

  static WeightVector uniform(Eigen::Index n) {
    return WeightVector{Vector::Ones(n)};
  }

  void validate(std::optional<double> cap = std::nullopt) const {
    if ((w.array() < 0.0).any())
      throw ContractError("WeightVector: negative weight");
    if (cap && (w.array() > *cap + 1e-12).any())
      throw ContractError("WeightVector: weight exceeds cap");
  }
};

struct HyperParams {
  double lambda1 = 0.0;  // L1 penalty on beta
  double lambda2 = 1.0;  // decorrelation penalty
  double lambda3 = 0.1;  // weight-variance penalty
  double lambda4 = 1.0;  // weight-sum penalty
  double lr_w = 0.005;   // per-sample step scale; effective step is lr_w * n
  double lr_beta = 0.0;  // 0 means 1/L with L the Lipschitz estimate
  int max_iters = 5000;
  double tol = 1e-6;
  std::optional<double> weight_cap;
  unsigned long long seed = 0;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
      throw ContractError("HyperParams: negative penalty");
    if (max_iters < 1) throw ContractError("HyperParams: max_iters < 1");
    if (tol <= 0) throw ContractError("HyperParams: tol <= 0");
    if (lr_w <= 0) throw ContractError("HyperParams: lr_w <= 0");
  }
};

struct FitResult {
  Vector beta;
  WeightVector weights;
  std::vector<double> loss_trace;
  bool converged = false;
  int iters_used = 0;
};

}  // namespace dwr
