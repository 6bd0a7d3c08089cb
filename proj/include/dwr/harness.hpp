#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dwr/io.hpp"
#include "dwr/metrics.hpp"
#include "dwr/regression.hpp"
#include "dwr/solver.hpp"
#include "dwr/synthetic.hpp"

namespace dwr {

/// One regressor entry in a scenario: a method name plus its penalties.
/// Entries in `tune` are searched over the hyper grid by validation RMSE.
struct MethodSpec {
  std::string name;  // OLS | Lasso | Ridge | IILasso | DWR
  HyperParams hp;
  std::vector<std::string> tune;
};

struct ScenarioConfig {
  GraphKind graph = GraphKind::SIndepV;
  OutcomeSpec outcome;
  Eigen::Index n = 2000;
  Eigen::Index p = 10;
  double r_train = 1.7;
  std::vector<double> r_test_grid = {-3.0, -2.5, -2.0, -1.7, -1.5, -1.3,
                                     1.3,  1.5,  1.7,  2.0,  2.5,  3.0};
  double vb_fraction = 0.1;
  int replications = 50;
  int test_envs_per_rate = 10;
  std::vector<MethodSpec> methods;
  std::vector<double> hyper_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
  unsigned long long base_seed = 1;
  int threads = 0;  // 0 means hardware concurrency

  void validate() const {
    if (replications < 1) throw ContractError("ScenarioConfig: replications < 1");
    if (test_envs_per_rate < 1)
      throw ContractError("ScenarioConfig: test_envs_per_rate < 1");
    for (double r : r_test_grid) {
      double a = std::abs(r);
      if (a <= 1.0 || a > 3.0)
        throw ContractError("ScenarioConfig: r_test outside (1,3] in modulus");
    }
    if (methods.empty()) throw ContractError("ScenarioConfig: no methods");
  }
};

struct ResultRow {
  std::string method;
  Eigen::Index n = 0, p = 0;
  double r_train = 0.0;
  double beta_s_error = 0.0;
  double beta_v_error = 0.0;
  double average_error = 0.0;
  double stability_error = 0.0;
  unsigned long long seed = 0;
};

struct MethodSummary {
  double beta_s_error = 0.0;
  double beta_v_error = 0.0;
  double average_error = 0.0;
  double stability_error = 0.0;
};

struct ScenarioResults {
  std::vector<ResultRow> rows;
  // mean over replications of the per-rate mean RMSE, per method
  std::map<std::string, std::map<double, double>> rmse_by_rate;
  std::map<std::string, MethodSummary> summary;
};

namespace detail {

inline unsigned long long mix_seed(unsigned long long seed,
                                   unsigned long long tag) {
  // splitmix64 step over seed ^ tag
  unsigned long long z = (seed ^ (tag * 0x9E3779B97F4A7C15ULL)) +
                         0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Column-centered view of a training set plus the offsets needed to score
/// new data in the original units.
struct CenteredFit {
  Vector x_means;
  double y_mean = 0.0;

  Dataset center(const Dataset& ds) const {
    Dataset out = ds;
    out.x = ds.x.rowwise() - x_means.transpose();
    out.y = ds.y.array() - y_mean;
    return out;
  }

  Vector predict(const Matrix& x, const Vector& beta) const {
    return ((x.rowwise() - x_means.transpose()) * beta).array() + y_mean;
  }
};

inline CenteredFit centering_for(const Dataset& ds) {
  return CenteredFit{ds.x.colwise().mean(), ds.y.mean()};
}

/// Fits one method on an already-centered dataset.
inline FitResult fit_method(const MethodSpec& m, const Dataset& ds) {
  FitResult fr;
  fr.weights = WeightVector::uniform(ds.n());
  if (m.name == "OLS") {
    fr.beta = baselines::ols_fit(ds);
    fr.converged = true;
  } else if (m.name == "Lasso") {
    fr.beta = baselines::lasso_fit(ds, m.hp.lambda1);
    fr.converged = true;
  } else if (m.name == "Ridge") {
    fr.beta = baselines::ridge_fit(ds, m.hp.lambda1);
    fr.converged = true;
  } else if (m.name == "IILasso") {
    fr.beta = baselines::iilasso_fit(ds, m.hp.lambda1, m.hp.lambda2);
    fr.converged = true;
  } else if (m.name == "DWR") {
    fr = dwr_fit(ds, m.hp);
  } else {
    throw ContractError("unknown method: " + m.name);
  }
  return fr;
}

/// Grid search over the hyperparameters named in spec.tune, scored by mean
/// RMSE over the validation datasets. Returns the winning spec.
inline MethodSpec tune_method(const MethodSpec& spec, const Dataset& train,
                              const std::vector<Dataset>& validation,
                              const std::vector<double>& grid) {
  if (spec.tune.empty() || validation.empty()) return spec;
  auto lambda_of = [](MethodSpec& m, const std::string& which) -> double& {
    if (which == "lambda1") return m.hp.lambda1;
    if (which == "lambda2") return m.hp.lambda2;
    if (which == "lambda3") return m.hp.lambda3;
    if (which == "lambda4") return m.hp.lambda4;
    throw ContractError("tune_method: unknown hyperparameter " + which);
  };

  CenteredFit ctr = centering_for(train);
  Dataset centered = ctr.center(train);
  std::vector<MethodSpec> candidates{spec};
  for (const auto& which : spec.tune) {
    std::vector<MethodSpec> next;
    for (const auto& cand : candidates) {
      for (double v : grid) {
        MethodSpec m = cand;
        lambda_of(m, which) = v;
        next.push_back(m);
      }
    }
    candidates = std::move(next);
  }

  MethodSpec best = spec;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& cand : candidates) {
    FitResult fr = fit_method(cand, centered);
    double score = 0.0;
    for (const auto& v : validation)
      score += rmse(v.y, ctr.predict(v.x, fr.beta));
    score /= static_cast<double>(validation.size());
    if (score < best_score) {
      best_score = score;
      best = cand;
    }
  }
  return best;
}

/// Full replication grid: train at r_train, evaluate on the r_test grid.
inline ScenarioResults run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto n_methods = cfg.methods.size();
  const auto n_rates = cfg.r_test_grid.size();

  struct RepOutput {
    std::vector<ResultRow> rows;
    // [method][rate] mean RMSE over the test draws
    std::vector<std::vector<double>> rate_rmse;
    bool failed = false;
  };
  std::vector<RepOutput> reps(cfg.replications);

  auto run_one = [&](int rep) {
    RepOutput& out = reps[rep];
    unsigned long long rep_seed = cfg.base_seed + static_cast<unsigned>(rep);
    EnvironmentSpec train_env{cfg.r_train, cfg.vb_fraction, cfg.n};
    Dataset train = make_environment(cfg.graph, cfg.outcome, train_env, cfg.p,
                                     detail::mix_seed(rep_seed, 1));
    CenteredFit ctr = centering_for(train);
    Dataset centered = ctr.center(train);
    const GroundTruth& gt = *train.truth;

    std::vector<Dataset> validation;
    bool any_tuned = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                 [](const MethodSpec& m) { return !m.tune.empty(); });
    if (any_tuned) {
      for (int v = 0; v < 2; ++v)
        validation.push_back(make_environment(
            cfg.graph, cfg.outcome, train_env, cfg.p,
            detail::mix_seed(rep_seed, 900 + static_cast<unsigned>(v))));
    }

    std::vector<FitResult> fits(n_methods);
    std::vector<bool> ok(n_methods, true);
    for (size_t m = 0; m < n_methods; ++m) {
      try {
        MethodSpec spec =
            tune_method(cfg.methods[m], train, validation, cfg.hyper_grid);
        fits[m] = fit_method(spec, centered);
      } catch (const std::exception&) {
        ok[m] = false;
      }
    }

    out.rate_rmse.assign(n_methods, std::vector<double>(n_rates, 0.0));
    for (size_t rt = 0; rt < n_rates; ++rt) {
      for (int t = 0; t < cfg.test_envs_per_rate; ++t) {
        EnvironmentSpec test_env{cfg.r_test_grid[rt], cfg.vb_fraction, cfg.n};
        Dataset test = make_environment(
            cfg.graph, cfg.outcome, test_env, cfg.p,
            detail::mix_seed(rep_seed, 10000 + rt * 1000 + static_cast<unsigned>(t)));
        for (size_t m = 0; m < n_methods; ++m) {
          if (!ok[m]) continue;
          out.rate_rmse[m][rt] +=
              rmse(test.y, ctr.predict(test.x, fits[m].beta));
        }
      }
      for (size_t m = 0; m < n_methods; ++m)
        out.rate_rmse[m][rt] /= cfg.test_envs_per_rate;
    }

    for (size_t m = 0; m < n_methods; ++m) {
      if (!ok[m]) {
        out.failed = true;
        continue;
      }
      auto [avg, stab] = stability_metrics(out.rate_rmse[m]);
      ResultRow row;
      row.method = cfg.methods[m].name;
      row.n = cfg.n;
      row.p = cfg.p;
      row.r_train = cfg.r_train;
      row.beta_s_error = beta_error(fits[m].beta, gt.beta_true, gt.stable_cols);
      row.beta_v_error = beta_error(fits[m].beta, gt.beta_true, gt.unstable_cols);
      row.average_error = avg;
      row.stability_error = stab;
      row.seed = rep_seed;
      out.rows.push_back(row);
    }
  };

  int n_threads = cfg.threads > 0
                      ? cfg.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, cfg.replications));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (int rep = next.fetch_add(1); rep < cfg.replications;
           rep = next.fetch_add(1))
        run_one(rep);
    });
  for (auto& th : pool) th.join();

  int failures = 0;
  ScenarioResults res;
  std::map<std::string, std::vector<double>> rate_acc_count;
  for (int rep = 0; rep < cfg.replications; ++rep) {
    if (reps[rep].failed) ++failures;
    for (auto& row : reps[rep].rows) res.rows.push_back(row);
    for (size_t m = 0; m < n_methods; ++m) {
      if (reps[rep].rate_rmse.empty()) continue;
      auto& per_rate = res.rmse_by_rate[cfg.methods[m].name];
      for (size_t rt = 0; rt < n_rates; ++rt)
        per_rate[cfg.r_test_grid[rt]] += reps[rep].rate_rmse[m][rt];
    }
  }
  if (failures > cfg.replications / 5)
    throw DivergedError("run_scenario: more than 20% of replications failed");
  for (auto& [name, per_rate] : res.rmse_by_rate)
    for (auto& [rate, v] : per_rate) v /= cfg.replications;

  for (const auto& m : cfg.methods) {
    MethodSummary s;
    int count = 0;
    for (const auto& row : res.rows) {
      if (row.method != m.name) continue;
      s.beta_s_error += row.beta_s_error;
      s.beta_v_error += row.beta_v_error;
      s.average_error += row.average_error;
      s.stability_error += row.stability_error;
      ++count;
    }
    if (count > 0) {
      s.beta_s_error /= count;
      s.beta_v_error /= count;
      s.average_error /= count;
      s.stability_error /= count;
    }
    res.summary[m.name] = s;
  }
  return res;
}

inline void write_results_csv(const ScenarioResults& res,
                              const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IngestionError("cannot open for writing: " + path);
  f << "method,n,p,r_train,beta_s_error,beta_v_error,average_error,"
       "stability_error,seed\n";
  for (const auto& r : res.rows)
    f << r.method << "," << r.n << "," << r.p << ","
      << io::format_double(r.r_train) << ","
      << io::format_double(r.beta_s_error) << ","
      << io::format_double(r.beta_v_error) << ","
      << io::format_double(r.average_error) << ","
      << io::format_double(r.stability_error) << "," << r.seed << "\n";
}

/// Plot-ready CSVs: per-method RMSE against the test bias rate, and the
/// per-method error summary.
inline void emit_plots(const ScenarioResults& res, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir + "/rmse_vs_rtest.csv");
    f << "method,r_test,rmse\n";
    for (const auto& [name, per_rate] : res.rmse_by_rate)
      for (const auto& [rate, v] : per_rate)
        f << name << "," << io::format_double(rate) << ","
          << io::format_double(v) << "\n";
  }
  {
    std::ofstream f(dir + "/summary.csv");
    f << "method,beta_s_error,beta_v_error,average_error,stability_error\n";
    for (const auto& [name, s] : res.summary)
      f << name << "," << io::format_double(s.beta_s_error) << ","
        << io::format_double(s.beta_v_error) << ","
        << io::format_double(s.average_error) << ","
        << io::format_double(s.stability_error) << "\n";
  }
}

struct SweepPoint {
  double lambda2 = 0.0;
  double average_error = 0.0;
  double stability_error = 0.0;
};

/// Sweeps the decorrelation penalty of the first DWR method over the hyper
/// grid, re-running the scenario at each value.
inline std::vector<SweepPoint> sweep_lambda2(ScenarioConfig cfg) {
  auto it = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                         [](const MethodSpec& m) { return m.name == "DWR"; });
  if (it == cfg.methods.end())
    throw ContractError("sweep_lambda2: no DWR method in config");
  MethodSpec dwr = *it;
  dwr.tune.clear();
  cfg.methods = {dwr};

  std::vector<SweepPoint> points;
  for (double v : cfg.hyper_grid) {
    cfg.methods[0].hp.lambda2 = v;
    ScenarioResults res = run_scenario(cfg);
    const auto& s = res.summary.at("DWR");
    points.push_back({v, s.average_error, s.stability_error});
  }
  return points;
}

inline void write_sweep_csv(const std::vector<SweepPoint>& points,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IngestionError("cannot open for writing: " + path);
  f << "lambda2,average_error,stability_error\n";
  for (const auto& pt : points)
    f << io::format_double(pt.lambda2) << ","
      << io::format_double(pt.average_error) << ","
      << io::format_double(pt.stability_error) << "\n";
}

struct RealDataConfig {
  std::string train_csv;
  std::vector<std::string> validation_csvs;
  std::vector<std::string> test_csvs;
  std::string outcome_column;
  std::vector<std::string> feature_columns;
  std::vector<MethodSpec> methods;
  std::vector<double> hyper_grid = {0.0, 0.01, 0.1, 1.0, 10.0, 100.0};
};

struct RealTestRow {
  std::string file;
  double distribution_distance = 0.0;
  std::map<std::string, double> rmse_by_method;
};

struct RealResults {
  std::vector<RealTestRow> rows;  // sorted by ascending distance
  std::map<std::string, MethodSummary> summary;
};

/// Environment-per-file experiment: train on one CSV, tune on the validation
/// CSVs, report per-test-file RMSE ordered by distribution distance.
inline RealResults run_real(const RealDataConfig& cfg) {
  if (cfg.methods.empty()) throw ContractError("run_real: no methods");
  Dataset train = io::read_dataset_csv(cfg.train_csv, cfg.outcome_column,
                                       cfg.feature_columns);
  train.validate();
  std::vector<Dataset> validation;
  for (const auto& path : cfg.validation_csvs)
    validation.push_back(io::read_dataset_csv(path, cfg.outcome_column,
                                              cfg.feature_columns));
  for (const auto& v : validation)
    if (v.p() != train.p())
      throw IngestionError("run_real: schema mismatch in validation file");

  CenteredFit ctr = centering_for(train);
  Dataset centered = ctr.center(train);

  std::map<std::string, FitResult> fits;
  for (const auto& spec : cfg.methods) {
    MethodSpec chosen = tune_method(spec, train, validation, cfg.hyper_grid);
    fits[spec.name] = fit_method(chosen, centered);
  }

  RealResults res;
  for (const auto& path : cfg.test_csvs) {
    Dataset test = io::read_dataset_csv(path, cfg.outcome_column,
                                        cfg.feature_columns);
    if (test.p() != train.p())
      throw IngestionError("run_real: schema mismatch in test file " + path);
    RealTestRow row;
    row.file = path;
    row.distribution_distance = distribution_distance(train.x, test.x);
    for (const auto& [name, fr] : fits)
      row.rmse_by_method[name] = rmse(test.y, ctr.predict(test.x, fr.beta));
    res.rows.push_back(std::move(row));
  }
  std::stable_sort(res.rows.begin(), res.rows.end(),
                   [](const RealTestRow& a, const RealTestRow& b) {
                     return a.distribution_distance < b.distribution_distance;
                   });

  for (const auto& spec : cfg.methods) {
    std::vector<double> rmses;
    for (const auto& row : res.rows)
      rmses.push_back(row.rmse_by_method.at(spec.name));
    MethodSummary s;
    if (rmses.size() >= 2) {
      auto [avg, stab] = stability_metrics(rmses);
      s.average_error = avg;
      s.stability_error = stab;
    } else if (!rmses.empty()) {
      s.average_error = rmses.front();
    }
    res.summary[spec.name] = s;
  }
  return res;
}

inline void write_real_csv(const RealResults& res, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IngestionError("cannot open for writing: " + path);
  f << "file,distribution_distance";
  std::vector<std::string> methods;
  if (!res.rows.empty())
    for (const auto& [name, _] : res.rows.front().rmse_by_method) {
      methods.push_back(name);
      f << ",rmse_" << name;
    }
  f << "\n";
  for (const auto& row : res.rows) {
    f << row.file << "," << io::format_double(row.distribution_distance);
    for (const auto& name : methods)
      f << "," << io::format_double(row.rmse_by_method.at(name));
    f << "\n";
  }
}

// ---- JSON config ingestion (field names mirror the config structs) ----

inline MethodSpec method_from_json(const nlohmann::json& j) {
  MethodSpec m;
  m.name = j.at("name").get<std::string>();
  m.hp.lambda1 = j.value("lambda1", m.hp.lambda1);
  m.hp.lambda2 = j.value("lambda2", m.hp.lambda2);
  m.hp.lambda3 = j.value("lambda3", m.hp.lambda3);
  m.hp.lambda4 = j.value("lambda4", m.hp.lambda4);
  m.hp.lr_w = j.value("lr_w", m.hp.lr_w);
  m.hp.lr_beta = j.value("lr_beta", m.hp.lr_beta);
  m.hp.max_iters = j.value("max_iters", m.hp.max_iters);
  m.hp.tol = j.value("tol", m.hp.tol);
  if (j.contains("weight_cap")) m.hp.weight_cap = j["weight_cap"].get<double>();
  m.tune = j.value("tune", std::vector<std::string>{});
  return m;
}

inline ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  cfg.graph = graph_from_string(j.value("graph", to_string(cfg.graph)));
  std::string form = j.value("outcome_form", "poly");
  cfg.outcome.form = form == "exp" ? OutcomeForm::Exp : OutcomeForm::Poly;
  cfg.outcome.noise_sd = j.value("noise_sd", cfg.outcome.noise_sd);
  cfg.n = j.value("n", cfg.n);
  cfg.p = j.value("p", cfg.p);
  cfg.r_train = j.value("r_train", cfg.r_train);
  cfg.r_test_grid = j.value("r_test_grid", cfg.r_test_grid);
  cfg.vb_fraction = j.value("vb_fraction", cfg.vb_fraction);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.test_envs_per_rate = j.value("test_envs_per_rate", cfg.test_envs_per_rate);
  cfg.hyper_grid = j.value("hyper_grid", cfg.hyper_grid);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  cfg.threads = j.value("threads", cfg.threads);
  for (const auto& mj : j.at("methods")) cfg.methods.push_back(method_from_json(mj));
  return cfg;
}

inline RealDataConfig real_config_from_json(const nlohmann::json& j) {
  RealDataConfig cfg;
  cfg.train_csv = j.at("train_csv").get<std::string>();
  cfg.validation_csvs = j.value("validation_csvs", cfg.validation_csvs);
  cfg.test_csvs = j.at("test_csvs").get<std::vector<std::string>>();
  cfg.outcome_column = j.value("outcome_column", std::string{});
  cfg.feature_columns = j.value("feature_columns", cfg.feature_columns);
  cfg.hyper_grid = j.value("hyper_grid", cfg.hyper_grid);
  for (const auto& mj : j.at("methods")) cfg.methods.push_back(method_from_json(mj));
  return cfg;
}

}  // namespace dwr
