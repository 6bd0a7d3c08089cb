#pragma once

#include <cmath>
#include <random>
#include <string>

#include "dwr/types.hpp"

namespace dwr {

enum class GraphKind { SIndepV, StoV, VtoS };

inline std::string to_string(GraphKind g) {
  switch (g) {
    case GraphKind::SIndepV: return "s_indep_v";
    case GraphKind::StoV: return "s_to_v";
    case GraphKind::VtoS: return "v_to_s";
  }
  return "?";
}

inline GraphKind graph_from_string(const std::string& s) {
  if (s == "s_indep_v") return GraphKind::SIndepV;
  if (s == "s_to_v") return GraphKind::StoV;
  if (s == "v_to_s") return GraphKind::VtoS;
  throw ContractError("unknown graph kind: " + s);
}

enum class OutcomeForm { Poly, Exp };

struct OutcomeSpec {
  OutcomeForm form = OutcomeForm::Poly;
  double noise_sd = 0.3;
};

struct EnvironmentSpec {
  double bias_rate = 1.7;     // |r| in (1, 3]
  double vb_fraction = 0.1;   // fraction of p forming V_b
  Eigen::Index target_n = 0;

  void validate() const {
    double a = std::abs(bias_rate);
    if (a <= 1.0 || a > 3.0)
      throw ContractError("EnvironmentSpec: |r| must lie in (1, 3]");
    if (target_n < 1) throw ContractError("EnvironmentSpec: target_n < 1");
  }
};

/// Repeating stable-coefficient pattern {1/3, -2/3, 1, -1/3, 2/3, -1, ...}.
inline double beta_s_pattern(Eigen::Index i) {
  static const double pat[6] = {1.0 / 3, -2.0 / 3, 1.0, -1.0 / 3, 2.0 / 3, -1.0};
  return pat[i % 6];
}

/// Covariates for the three causal layouts. Stable columns come first,
/// unstable columns after; p must be even so p_s = p_v = p/2.
inline Dataset generate_covariates(GraphKind graph, Eigen::Index n,
                                   Eigen::Index p, unsigned long long seed) {
  if (p < 2 || p % 2 != 0)
    throw ContractError("generate_covariates: p must be even and >= 2");
  if (n < 1) throw ContractError("generate_covariates: n < 1");
  const Eigen::Index ps = p / 2, pv = p / 2;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    return m;
  };

  Matrix s(n, ps), v(n, pv);
  switch (graph) {
    case GraphKind::SIndepV: {
      Matrix z = draw(n, p);
      v = draw(n, pv);
      for (Eigen::Index j = 0; j < ps; ++j)
        s.col(j) = 0.8 * z.col(j) + 0.2 * z.col(j + 1);
      break;
    }
    case GraphKind::StoV: {
      Matrix z = draw(n, p);
      for (Eigen::Index j = 0; j < ps; ++j)
        s.col(j) = 0.8 * z.col(j) + 0.2 * z.col(j + 1);
      Matrix noise = draw(n, pv);
      for (Eigen::Index j = 0; j < pv; ++j)
        v.col(j) = 0.8 * s.col(j % ps) + 0.2 * s.col((j + 1) % ps) + noise.col(j);
      break;
    }
    case GraphKind::VtoS: {
      v = draw(n, pv);
      Matrix noise = draw(n, ps);
      for (Eigen::Index j = 0; j < ps; ++j)
        s.col(j) = 0.2 * v.col(j % pv) + 0.8 * v.col((j + 1) % pv) + noise.col(j);
      break;
    }
  }

  Dataset ds;
  ds.x.resize(n, p);
  ds.x << s, v;
  ds.feature_names.resize(p);
  for (Eigen::Index j = 0; j < ps; ++j)
    ds.feature_names[j] = "S" + std::to_string(j + 1);
  for (Eigen::Index j = 0; j < pv; ++j)
    ds.feature_names[ps + j] = "V" + std::to_string(j + 1);

  GroundTruth gt;
  gt.beta_true = Vector::Zero(p);
  for (Eigen::Index j = 0; j < ps; ++j) {
    gt.stable_cols.push_back(j);
    gt.beta_true[j] = beta_s_pattern(j);
  }
  for (Eigen::Index j = 0; j < pv; ++j) gt.unstable_cols.push_back(ps + j);
  ds.truth = gt;
  return ds;
}

/// Fills Y = S beta_s + g(S) + eps with g the three-way product of the first
/// stable columns (Poly) or its exponential (Exp).
inline Dataset generate_outcome(Dataset ds, const OutcomeSpec& spec,
                                unsigned long long seed) {
  if (!ds.truth) throw ContractError("generate_outcome: missing ground truth");
  if (spec.noise_sd <= 0) throw ContractError("generate_outcome: noise_sd <= 0");
  auto& gt = *ds.truth;
  const auto n = ds.n();
  const Eigen::Index ps = static_cast<Eigen::Index>(gt.stable_cols.size());

  Vector g = Vector::Ones(n);
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(3, ps); ++j)
    g.array() *= ds.x.col(gt.stable_cols[j]).array();
  if (spec.form == OutcomeForm::Exp) g = g.array().exp();

  Vector linear = ds.x * gt.beta_true;
  gt.nonlinear_term = g;
  gt.f_values = linear + g;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sd);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ds.y[i] = gt.f_values[i] + noise(rng);
  return ds;
}

/// Acceptance probability of one candidate row under biased selection:
/// Pr = prod over V_b features of |r|^(-5 |f(S) - sign(r) v|).
inline double selection_probability(double f_value, const Vector& vb_values,
                                    double r) {
  double sign = r > 0 ? 1.0 : -1.0;
  double exponent = 0.0;
  for (Eigen::Index k = 0; k < vb_values.size(); ++k)
    exponent += std::abs(f_value - sign * vb_values[k]);
  return std::pow(std::abs(r), -5.0 * exponent);
}

inline IndexSet biased_columns(const GroundTruth& gt, Eigen::Index p,
                               double vb_fraction) {
  auto count = static_cast<Eigen::Index>(
      std::ceil(vb_fraction * static_cast<double>(p)));
  count = std::max<Eigen::Index>(1, std::min<Eigen::Index>(
      count, static_cast<Eigen::Index>(gt.unstable_cols.size())));
  IndexSet vb(gt.unstable_cols.end() - count, gt.unstable_cols.end());
  return vb;
}

/// Biased sample selection over a candidate pool. Rows are scanned in order
/// and accepted independently until target_n rows are kept; throws if the
/// pool runs out. The accepted V_b set is recorded in the ground truth.
inline Dataset select_environment(const Dataset& pool,
                                  const EnvironmentSpec& env,
                                  unsigned long long seed) {
  env.validate();
  if (!pool.truth || pool.truth->f_values.size() != pool.n())
    throw ContractError("select_environment: pool lacks f values");
  if (pool.y.size() != pool.n())
    throw ContractError("select_environment: pool lacks outcomes");

  IndexSet vb = biased_columns(*pool.truth, pool.p(), env.vb_fraction);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<Eigen::Index> kept;
  kept.reserve(env.target_n);
  for (Eigen::Index i = 0; i < pool.n() &&
       static_cast<Eigen::Index>(kept.size()) < env.target_n; ++i) {
    Vector vb_vals(vb.size());
    for (size_t k = 0; k < vb.size(); ++k) vb_vals[k] = pool.x(i, vb[k]);
    double pr = selection_probability(pool.truth->f_values[i], vb_vals,
                                      env.bias_rate);
    if (unif(rng) < pr) kept.push_back(i);
  }
  if (static_cast<Eigen::Index>(kept.size()) < env.target_n)
    throw StarvationError("select_environment: candidate pool exhausted at " +
                        std::to_string(kept.size()) + "/" +
                        std::to_string(env.target_n) + " rows");

  Dataset out;
  out.x.resize(env.target_n, pool.p());
  out.y.resize(env.target_n);
  out.feature_names = pool.feature_names;
  GroundTruth gt = *pool.truth;
  gt.biased_cols = vb;
  gt.nonlinear_term.resize(env.target_n);
  gt.f_values.resize(env.target_n);
  for (Eigen::Index i = 0; i < env.target_n; ++i) {
    out.x.row(i) = pool.x.row(kept[i]);
    out.y[i] = pool.y[kept[i]];
    gt.nonlinear_term[i] = pool.truth->nonlinear_term[kept[i]];
    gt.f_values[i] = pool.truth->f_values[kept[i]];
  }
  out.truth = gt;
  return out;
}

/// Full pipeline for one environment: draw fresh candidate batches from the
/// generator distribution and apply biased selection until target_n rows
/// are accepted.
inline Dataset make_environment(GraphKind graph, const OutcomeSpec& outcome,
                                const EnvironmentSpec& env, Eigen::Index p,
                                unsigned long long seed) {
  env.validate();
  // Per-unit-D acceptance |r|^-5 with D typically O(1); start near the
  // expected pool size and grow on starvation.
  Eigen::Index batch = env.target_n * 8;
  constexpr Eigen::Index kMaxCandidates = 10'000'000;
  Eigen::Index spent = 0;
  for (int attempt = 0; spent < kMaxCandidates; ++attempt) {
    Dataset pool = generate_covariates(graph, batch, p, seed + 1000003ULL * attempt);
    pool = generate_outcome(std::move(pool), outcome,
                            seed + 1000003ULL * attempt + 1);
    spent += batch;
    try {
      return select_environment(pool, env, seed + 1000003ULL * attempt + 2);
    } catch (const StarvationError&) {
      batch *= 4;
    }
  }
  throw StarvationError("make_environment: acceptance starvation after " +
                        std::to_string(spent) + " candidates");
}

}  // namespace dwr
