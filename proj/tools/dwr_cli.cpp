// Command-line front end: dataset generation, single fits, metric
// evaluation, scenario grids, real-data runs, hyperparameter sweeps, and
// correlation matrices.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwr/harness.hpp"
#include "dwr/kde.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIngestion = 3;
constexpr int kExitNumerical = 4;

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw dwr::IngestionError("cannot open config: " + path);
  nlohmann::json j;
  f >> j;
  return j;
}

void print_matrix_csv(std::ostream& os, const dwr::Matrix& m,
                      const std::vector<std::string>& names) {
  for (size_t j = 0; j < names.size(); ++j)
    os << (j ? "," : "") << names[j];
  os << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << (j ? "," : "") << dwr::io::format_double(m(i, j));
    os << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decorrelated weighting regression toolkit"};
  app.require_subcommand(1);

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset CSV");
  std::string gen_graph = "s_indep_v", gen_form = "poly", gen_out = "dataset.csv";
  int gen_n = 2000, gen_p = 10;
  double gen_noise = 0.3, gen_r = 0.0, gen_vb = 0.1;
  unsigned long long gen_seed = 1;
  gen->add_option("--graph", gen_graph, "s_indep_v | s_to_v | v_to_s");
  gen->add_option("--form", gen_form, "poly | exp");
  gen->add_option("-n", gen_n, "sample size");
  gen->add_option("-p", gen_p, "feature count (even)");
  gen->add_option("--noise-sd", gen_noise, "outcome noise sd");
  gen->add_option("--bias-rate", gen_r, "bias rate r; 0 skips selection");
  gen->add_option("--vb-fraction", gen_vb, "fraction of p forming V_b");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("-o,--output", gen_out, "output CSV path");

  // --- fit ---
  auto* fit = app.add_subcommand("fit", "Fit one method on one dataset");
  std::string fit_data, fit_method_name = "DWR", fit_out;
  double f_l1 = 0.0, f_l2 = 1.0, f_l3 = 0.1, f_l4 = 1.0;
  int f_iters = 5000;
  fit->add_option("data", fit_data, "dataset CSV")->required();
  fit->add_option("--method", fit_method_name, "OLS | Lasso | Ridge | IILasso | DWR");
  fit->add_option("--lambda1", f_l1);
  fit->add_option("--lambda2", f_l2);
  fit->add_option("--lambda3", f_l3);
  fit->add_option("--lambda4", f_l4);
  fit->add_option("--max-iters", f_iters);
  fit->add_option("-o,--output", fit_out, "save fit JSON here");

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "Evaluate a saved fit on a dataset");
  std::string eval_data, eval_fit;
  eval->add_option("data", eval_data, "dataset CSV")->required();
  eval->add_option("fit", eval_fit, "fit JSON from `fit -o`")->required();

  // --- scenario ---
  auto* scen = app.add_subcommand("scenario", "Run a replication grid from a config");
  std::string scen_cfg, scen_out = "results";
  scen->add_option("config", scen_cfg, "scenario config JSON")->required();
  scen->add_option("-o,--output", scen_out, "output directory");

  // --- real ---
  auto* real = app.add_subcommand("real", "Per-file environment run from CSVs");
  std::string real_cfg, real_out = "real_results.csv";
  real->add_option("config", real_cfg, "real-data config JSON")->required();
  real->add_option("-o,--output", real_out, "output CSV");

  // --- sweep ---
  auto* sweep = app.add_subcommand("sweep", "Sweep lambda2 for the DWR method");
  std::string sweep_cfg, sweep_out = "sweep.csv";
  sweep->add_option("config", sweep_cfg, "scenario config JSON")->required();
  sweep->add_option("-o,--output", sweep_out, "output CSV");

  // --- corr ---
  auto* corr = app.add_subcommand("corr", "Emit Pearson correlation matrices");
  std::string corr_data, corr_weights;
  corr->add_option("data", corr_data, "dataset CSV")->required();
  corr->add_option("--weights", corr_weights, "fit JSON whose weights to apply");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      dwr::OutcomeSpec outcome;
      outcome.form = gen_form == "exp" ? dwr::OutcomeForm::Exp : dwr::OutcomeForm::Poly;
      outcome.noise_sd = gen_noise;
      dwr::GraphKind graph = dwr::graph_from_string(gen_graph);
      dwr::Dataset ds;
      dwr::EnvironmentSpec env{gen_r, gen_vb, gen_n};
      const dwr::EnvironmentSpec* env_ptr = nullptr;
      if (gen_r != 0.0) {
        ds = dwr::make_environment(graph, outcome, env, gen_p, gen_seed);
        env_ptr = &env;
      } else {
        ds = dwr::generate_covariates(graph, gen_n, gen_p, gen_seed);
        ds = dwr::generate_outcome(std::move(ds), outcome, gen_seed + 1);
      }
      dwr::io::write_dataset_csv(ds, gen_out);
      dwr::io::write_metadata_json(ds, graph, outcome, env_ptr, gen_seed,
                                   gen_out + ".meta.json");
      std::cout << "wrote " << gen_out << " (" << ds.n() << " x " << ds.p()
                << ")\n";
    } else if (*fit) {
      dwr::Dataset ds = dwr::io::read_dataset_csv(fit_data);
      ds.validate();
      dwr::CenteredFit ctr = dwr::centering_for(ds);
      dwr::MethodSpec spec;
      spec.name = fit_method_name;
      spec.hp.lambda1 = f_l1;
      spec.hp.lambda2 = f_l2;
      spec.hp.lambda3 = f_l3;
      spec.hp.lambda4 = f_l4;
      spec.hp.max_iters = f_iters;
      dwr::FitResult fr = dwr::fit_method(spec, ctr.center(ds));
      std::cout << "beta:";
      for (Eigen::Index j = 0; j < fr.beta.size(); ++j)
        std::cout << " " << dwr::io::format_double(fr.beta[j]);
      std::cout << "\nweights: mean " << dwr::io::format_double(fr.weights.mean())
                << " min " << dwr::io::format_double(fr.weights.w.minCoeff())
                << " max " << dwr::io::format_double(fr.weights.w.maxCoeff())
                << "\nconverged: " << (fr.converged ? "yes" : "no")
                << " iters: " << fr.iters_used << "\n";
      if (!fit_out.empty()) dwr::io::write_fit_json(fr, fit_out);
    } else if (*eval) {
      dwr::Dataset ds = dwr::io::read_dataset_csv(eval_data);
      dwr::FitResult fr = dwr::io::read_fit_json(eval_fit);
      if (fr.beta.size() != ds.p())
        throw dwr::ContractError("eval: fit dimension does not match dataset");
      dwr::CenteredFit ctr = dwr::centering_for(ds);
      double err = dwr::rmse(ds.y, ctr.predict(ds.x, fr.beta));
      std::cout << "rmse," << dwr::io::format_double(err) << "\n";
    } else if (*scen) {
      dwr::ScenarioConfig cfg = dwr::scenario_config_from_json(load_json(scen_cfg));
      dwr::ScenarioResults res = dwr::run_scenario(cfg);
      std::filesystem::create_directories(scen_out);
      dwr::write_results_csv(res, scen_out + "/results.csv");
      dwr::emit_plots(res, scen_out);
      for (const auto& [name, s] : res.summary)
        std::cout << name << ": beta_s_err " << s.beta_s_error
                  << " beta_v_err " << s.beta_v_error << " avg_err "
                  << s.average_error << " stab_err " << s.stability_error
                  << "\n";
    } else if (*real) {
      dwr::RealDataConfig cfg = dwr::real_config_from_json(load_json(real_cfg));
      dwr::RealResults res = dwr::run_real(cfg);
      dwr::write_real_csv(res, real_out);
      for (const auto& [name, s] : res.summary)
        std::cout << name << ": avg_err " << s.average_error << " stab_err "
                  << s.stability_error << "\n";
    } else if (*sweep) {
      dwr::ScenarioConfig cfg = dwr::scenario_config_from_json(load_json(sweep_cfg));
      auto points = dwr::sweep_lambda2(cfg);
      dwr::write_sweep_csv(points, sweep_out);
      for (const auto& pt : points)
        std::cout << "lambda2 " << pt.lambda2 << ": avg_err "
                  << pt.average_error << " stab_err " << pt.stability_error
                  << "\n";
    } else if (*corr) {
      dwr::Dataset ds = dwr::io::read_dataset_csv(corr_data);
      print_matrix_csv(std::cout, dwr::pearson_matrix(ds.x), ds.feature_names);
      if (!corr_weights.empty()) {
        dwr::FitResult fr = dwr::io::read_fit_json(corr_weights);
        std::cout << "\n";
        print_matrix_csv(std::cout, dwr::pearson_matrix(ds.x, &fr.weights),
                         ds.feature_names);
      }
    }
  } catch (const dwr::IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const dwr::ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
