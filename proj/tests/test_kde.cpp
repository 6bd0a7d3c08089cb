#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dwr/decorrelation.hpp"
#include "dwr/kde.hpp"

using namespace dwr;

namespace {

Matrix independent_gaussians(Eigen::Index n, Eigen::Index p,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = gauss(rng);
  return x;
}

Matrix correlated_bivariate(Eigen::Index n, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    double a = gauss(rng), b = gauss(rng);
    x(i, 0) = a;
    x(i, 1) = rho * a + std::sqrt(1.0 - rho * rho) * b;
  }
  return x;
}

double weight_sd(const Vector& w) {
  double m = w.mean();
  return std::sqrt((w.array() - m).square().sum() /
                   static_cast<double>(w.size() - 1));
}

}  // namespace

TEST_CASE("independent columns give weights concentrating at 1") {
  std::mt19937_64 rng(2);
  double sd_small = weight_sd(kde_oracle_weights(independent_gaussians(200, 2, rng))
                                  .weights.w);
  double sd_large = weight_sd(kde_oracle_weights(independent_gaussians(2000, 2, rng))
                                  .weights.w);
  CHECK(sd_large < sd_small);
  CHECK(sd_large < 0.25);
}

TEST_CASE("oracle weights are mean one and nonnegative") {
  std::mt19937_64 rng(8);
  auto res = kde_oracle_weights(correlated_bivariate(500, 0.8, rng));
  CHECK(res.weights.mean() == Catch::Approx(1.0).margin(1e-12));
  CHECK(res.weights.w.minCoeff() >= 0.0);
}

TEST_CASE("oracle weights cut the decorrelation loss at least 10x") {
  // Silverman targets density MISE, not ratio bias; the ratio attenuates as
  // O(h^2), so the oracle is evaluated undersmoothed at half the default.
  std::mt19937_64 rng(54);
  Matrix x = correlated_bivariate(5000, 0.8, rng);
  auto res = kde_oracle_weights(x, silverman_bandwidths(x) * 0.5);
  double lb_uniform = decorrelation_loss(x, WeightVector::uniform(5000));
  double lb_oracle = decorrelation_loss(x, res.weights);
  CHECK(lb_oracle * 10.0 <= lb_uniform);
}

TEST_CASE("constant column is rejected") {
  std::mt19937_64 rng(6);
  Matrix x = independent_gaussians(100, 2, rng);
  x.col(1).setConstant(3.0);
  CHECK_THROWS_AS(kde_oracle_weights(x), ContractError);
}

TEST_CASE("bandwidth length must match p") {
  std::mt19937_64 rng(7);
  Matrix x = independent_gaussians(60, 3, rng);
  Vector h(2);
  h << 0.3, 0.3;
  CHECK_THROWS_AS(kde_oracle_weights(x, h), ContractError);
}

TEST_CASE("silverman bandwidths scale with column spread") {
  std::mt19937_64 rng(12);
  Matrix x = independent_gaussians(400, 2, rng);
  x.col(1) *= 10.0;
  Vector h = silverman_bandwidths(x);
  CHECK(h[1] > 5.0 * h[0]);
  CHECK(h.minCoeff() > 0.0);
}
