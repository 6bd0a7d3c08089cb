#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("DWR_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("gen writes a dataset with metadata sidecar") {
  TempDir tmp("dwr_cli_gen");
  std::string out = (tmp.path / "d.csv").string();
  REQUIRE(run("gen -n 200 -p 6 --bias-rate 1.7 --seed 3 -o " + out) == 0);
  REQUIRE(fs::exists(out));
  REQUIRE(fs::exists(out + ".meta.json"));

  std::ifstream f(out + ".meta.json");
  nlohmann::json meta;
  f >> meta;
  CHECK(meta["n"] == 200);
  CHECK(meta["p"] == 6);
  CHECK(meta["bias_rate"] == 1.7);
  CHECK(meta["truth"]["biased_cols"].size() == 1);

  std::string header = slurp(out).substr(0, slurp(out).find('\n'));
  CHECK(header == "X1,X2,X3,X4,X5,X6,Y");
}

TEST_CASE("fit and eval round trip") {
  TempDir tmp("dwr_cli_fit");
  std::string data = (tmp.path / "d.csv").string();
  std::string fit = (tmp.path / "fit.json").string();
  REQUIRE(run("gen -n 300 -p 6 --bias-rate 1.7 --seed 5 -o " + data) == 0);
  REQUIRE(run("fit " + data + " --method DWR --lambda2 10 --max-iters 200 -o " +
              fit) == 0);
  REQUIRE(fs::exists(fit));
  CHECK(run("eval " + data + " " + fit) == 0);
}

TEST_CASE("corr accepts learned weights") {
  TempDir tmp("dwr_cli_corr");
  std::string data = (tmp.path / "d.csv").string();
  std::string fit = (tmp.path / "fit.json").string();
  REQUIRE(run("gen -n 300 -p 6 --bias-rate 1.7 --seed 6 -o " + data) == 0);
  REQUIRE(run("fit " + data + " --method DWR --max-iters 100 -o " + fit) == 0);
  CHECK(run("corr " + data + " --weights " + fit) == 0);
}

TEST_CASE("scenario runs from config and is byte-deterministic") {
  TempDir tmp("dwr_cli_scen");
  nlohmann::json cfg = {
      {"n", 250},
      {"p", 6},
      {"r_train", 1.7},
      {"r_test_grid", {-2.0, 1.5}},
      {"replications", 2},
      {"test_envs_per_rate", 2},
      {"base_seed", 11},
      {"threads", 2},
      {"methods",
       {{{"name", "OLS"}},
        {{"name", "DWR"}, {"lambda2", 10.0}, {"max_iters", 200}}}}};
  std::string cfg_path = (tmp.path / "cfg.json").string();
  std::ofstream(cfg_path) << cfg.dump();

  REQUIRE(run("scenario " + cfg_path + " -o " + (tmp.path / "r1").string()) == 0);
  REQUIRE(run("scenario " + cfg_path + " -o " + (tmp.path / "r2").string()) == 0);
  CHECK(slurp(tmp.path / "r1" / "results.csv") ==
        slurp(tmp.path / "r2" / "results.csv"));
  CHECK(slurp(tmp.path / "r1" / "results.csv")
            .starts_with("method,n,p,r_train,beta_s_error,beta_v_error,"
                         "average_error,stability_error,seed"));
}

TEST_CASE("config errors exit with code 2") {
  TempDir tmp("dwr_cli_err");
  std::string cfg_path = (tmp.path / "bad.json").string();
  std::ofstream(cfg_path) << R"({"n": 100, "p": 6, "methods": []})";
  CHECK(run("scenario " + cfg_path) == 2);

  std::ofstream(cfg_path) << R"({"not": "a scenario"})";
  CHECK(run("scenario " + cfg_path) == 2);
}

TEST_CASE("ingestion errors exit with code 3") {
  CHECK(run("fit /nonexistent/data.csv") == 3);
  TempDir tmp("dwr_cli_ing");
  std::string cfg_path = (tmp.path / "real.json").string();
  nlohmann::json cfg = {{"train_csv", "/nonexistent/train.csv"},
                        {"test_csvs", {"/nonexistent/test.csv"}},
                        {"methods", {{{"name", "OLS"}}}}};
  std::ofstream(cfg_path) << cfg.dump();
  CHECK(run("real " + cfg_path) == 3);
}

TEST_CASE("real subcommand on synthetic pseudo-states") {
  TempDir tmp("dwr_cli_real");
  for (int k = 0; k < 3; ++k) {
    double r = k == 0 ? 1.7 : (k == 1 ? 2.5 : -2.0);
    std::string path = (tmp.path / ("state" + std::to_string(k) + ".csv")).string();
    REQUIRE(run("gen -n 300 -p 6 --bias-rate " + std::to_string(r) +
                " --seed " + std::to_string(40 + k) + " -o " + path) == 0);
  }
  nlohmann::json cfg = {
      {"train_csv", (tmp.path / "state0.csv").string()},
      {"validation_csvs", {(tmp.path / "state0.csv").string()}},
      {"test_csvs",
       {(tmp.path / "state0.csv").string(), (tmp.path / "state1.csv").string(),
        (tmp.path / "state2.csv").string()}},
      {"methods",
       {{{"name", "Lasso"}, {"tune", {"lambda1"}}},
        {{"name", "DWR"}, {"lambda2", 10.0}, {"max_iters", 300}}}}};
  std::string cfg_path = (tmp.path / "real.json").string();
  std::ofstream(cfg_path) << cfg.dump();
  std::string out = (tmp.path / "real.csv").string();
  REQUIRE(run("real " + cfg_path + " -o " + out) == 0);

  // rows sorted by ascending distance; training file first with distance 0
  std::string text = slurp(out);
  std::istringstream lines(text);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(first.find("state0.csv,0") != std::string::npos);
}
