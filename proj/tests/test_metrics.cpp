#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dwr/decorrelation.hpp"
#include "dwr/metrics.hpp"
#include "dwr/synthetic.hpp"

using namespace dwr;

TEST_CASE("rmse trivial values") {
  Vector a(2), b(2);
  a << 0, 0;
  b << 1, -1;
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == Catch::Approx(1.0).margin(1e-15));
  Vector c(1), d(1);
  c << 3;
  d << 0;
  CHECK(rmse(c, d) == Catch::Approx(3.0).margin(1e-15));
  CHECK_THROWS_AS(rmse(a, c), ContractError);
}

TEST_CASE("beta error restriction to column sets") {
  Vector bt(2), bh(2);
  bt << 1, 0;
  bh << 0, 1;
  CHECK(beta_error(bh, bt) == Catch::Approx(2.0));
  bh << 0.5, 0.3;
  CHECK(beta_error(bh, bt, {0}) == Catch::Approx(0.5));
  CHECK(beta_error(bh, bt, {1}) == Catch::Approx(0.3));
  CHECK(beta_error(bt, bt) == 0.0);
}

TEST_CASE("stability metrics") {
  auto [avg, stab] = stability_metrics({0.4, 0.6});
  CHECK(avg == Catch::Approx(0.5).margin(1e-15));
  CHECK(stab == Catch::Approx(std::sqrt(0.02)).margin(1e-15));

  auto [avg2, stab2] = stability_metrics({0.7, 0.7, 0.7});
  CHECK(avg2 == Catch::Approx(0.7));
  CHECK(stab2 == Catch::Approx(0.0).margin(1e-12));

  auto [avg3, stab3] = stability_metrics({1.0, 2.0, 3.0});
  CHECK(avg3 == Catch::Approx(2.0));
  CHECK(stab3 == Catch::Approx(1.0));

  CHECK_THROWS_AS(stability_metrics({0.4}), ContractError);
}

TEST_CASE("stability metrics shift with a constant offset") {
  std::vector<double> base = {0.2, 0.5, 0.9, 0.4};
  auto [avg, stab] = stability_metrics(base);
  for (auto& v : base) v += 3.0;
  auto [avg2, stab2] = stability_metrics(base);
  CHECK(avg2 == Catch::Approx(avg + 3.0).margin(1e-12));
  CHECK(stab2 == Catch::Approx(stab).margin(1e-12));
}

TEST_CASE("pearson matrix basics") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Matrix x(200, 3);
  for (Eigen::Index i = 0; i < 200; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = gauss(rng);
  x.col(2) = x.col(0);  // duplicated column

  Matrix c = pearson_matrix(x);
  CHECK(c(0, 2) == Catch::Approx(1.0).margin(1e-12));
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(c(j, j) == Catch::Approx(1.0));
  CHECK((c - c.transpose()).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK(c.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);

  WeightVector w = WeightVector::uniform(200);
  Matrix cw = pearson_matrix(x, &w);
  CHECK((c - cw).lpNorm<Eigen::Infinity>() < 1e-12);

  x.col(1).setConstant(4.0);
  CHECK_THROWS_AS(pearson_matrix(x), ContractError);
}

TEST_CASE("distribution distance") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss;
  Matrix a(100, 3);
  for (Eigen::Index i = 0; i < 100; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) a(i, j) = gauss(rng);
  CHECK(distribution_distance(a, a) == 0.0);

  Matrix b = a;
  b.col(0).array() += 2.0;
  CHECK(distribution_distance(a, b) == Catch::Approx(2.0).margin(1e-12));
  CHECK(distribution_distance(a, b) == Catch::Approx(distribution_distance(b, a)));

  Matrix c(100, 2);
  CHECK_THROWS_AS(distribution_distance(a, c), ContractError);
}

TEST_CASE("omitted-variable diagnostics") {
  SECTION("independent blocks give near-zero moments") {
    Dataset ds = generate_covariates(GraphKind::SIndepV, 100000, 10, 41);
    ds = generate_outcome(std::move(ds), OutcomeSpec{}, 42);
    auto d = omitted_variable_diagnostics(ds);
    CHECK(d.cross_vg.lpNorm<Eigen::Infinity>() < 0.05);
    CHECK(d.cross_vs.lpNorm<Eigen::Infinity>() < 0.05);
  }

  SECTION("zero weights zero both moments") {
    Dataset ds = generate_covariates(GraphKind::SIndepV, 100, 10, 43);
    ds = generate_outcome(std::move(ds), OutcomeSpec{}, 44);
    WeightVector w{Vector::Zero(100)};
    auto d = omitted_variable_diagnostics(ds, &w);
    CHECK(d.cross_vg.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(d.cross_vs.lpNorm<Eigen::Infinity>() == 0.0);
  }

  SECTION("missing ground truth throws") {
    Dataset ds;
    ds.x = Matrix::Random(10, 4);
    ds.y = Vector::Random(10);
    CHECK_THROWS_AS(omitted_variable_diagnostics(ds), ContractError);
  }
}
