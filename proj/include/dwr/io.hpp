#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwr/synthetic.hpp"
#include "dwr/types.hpp"

namespace dwr {

/// Thrown for unreadable or schema-inconsistent input files.
struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

// Shortest round-trippable decimal text for a double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IngestionError("cannot open for writing: " + path);
  for (Eigen::Index j = 0; j < ds.p(); ++j) f << "X" << (j + 1) << ",";
  f << "Y\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.p(); ++j)
      f << format_double(ds.x(i, j)) << ",";
    f << format_double(ds.y[i]) << "\n";
  }
}

/// Reads a CSV with an arbitrary header; by default the last column is the
/// outcome and the rest are features.
inline Dataset read_dataset_csv(const std::string& path,
                                const std::string& outcome_column = "",
                                const std::vector<std::string>& feature_columns = {}) {
  std::ifstream f(path);
  if (!f) throw IngestionError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw IngestionError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() < 2)
    throw IngestionError(path + ": need at least one feature and one outcome column");

  std::vector<size_t> feat_idx;
  size_t y_idx;
  auto find_col = [&](const std::string& name) -> size_t {
    for (size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw IngestionError(path + ": missing column " + name);
  };
  if (outcome_column.empty()) {
    y_idx = header.size() - 1;
    for (size_t k = 0; k + 1 < header.size(); ++k) feat_idx.push_back(k);
  } else {
    y_idx = find_col(outcome_column);
    if (feature_columns.empty()) {
      for (size_t k = 0; k < header.size(); ++k)
        if (k != y_idx) feat_idx.push_back(k);
    } else {
      for (const auto& name : feature_columns) {
        size_t k = find_col(name);
        if (k == y_idx)
          throw IngestionError(path + ": outcome column listed as feature: " + name);
        feat_idx.push_back(k);
      }
    }
  }

  std::vector<std::vector<double>> rows;
  size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw IngestionError(path + ":" + std::to_string(line_no) +
                           ": expected " + std::to_string(header.size()) +
                           " cells, got " + std::to_string(cells.size()));
    std::vector<double> row(feat_idx.size() + 1);
    auto parse = [&](const std::string& cell) {
      try {
        size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
      } catch (const std::exception&) {
        throw IngestionError(path + ":" + std::to_string(line_no) +
                             ": bad number '" + cell + "'");
      }
    };
    for (size_t k = 0; k < feat_idx.size(); ++k) row[k] = parse(cells[feat_idx[k]]);
    row.back() = parse(cells[y_idx]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestionError(path + ": no data rows");

  Dataset ds;
  ds.x.resize(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(feat_idx.size()));
  ds.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t k = 0; k < feat_idx.size(); ++k)
      ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    ds.y[static_cast<Eigen::Index>(i)] = rows[i].back();
  }
  for (auto k : feat_idx) ds.feature_names.push_back(header[k]);
  return ds;
}

inline nlohmann::json truth_to_json(const GroundTruth& gt) {
  nlohmann::json j;
  j["stable_cols"] = gt.stable_cols;
  j["unstable_cols"] = gt.unstable_cols;
  j["biased_cols"] = gt.biased_cols;
  j["beta_true"] = std::vector<double>(gt.beta_true.begin(), gt.beta_true.end());
  return j;
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
  GroundTruth gt;
  gt.stable_cols = j.at("stable_cols").get<IndexSet>();
  gt.unstable_cols = j.at("unstable_cols").get<IndexSet>();
  gt.biased_cols = j.value("biased_cols", IndexSet{});
  auto bt = j.at("beta_true").get<std::vector<double>>();
  gt.beta_true = Eigen::Map<const Vector>(bt.data(), static_cast<Eigen::Index>(bt.size()));
  return gt;
}

/// Sidecar metadata for a generated dataset CSV.
inline void write_metadata_json(const Dataset& ds, GraphKind graph,
                                const OutcomeSpec& outcome,
                                const EnvironmentSpec* env,
                                unsigned long long seed,
                                const std::string& path) {
  nlohmann::json j;
  j["graph"] = to_string(graph);
  j["outcome_form"] = outcome.form == OutcomeForm::Poly ? "poly" : "exp";
  j["noise_sd"] = outcome.noise_sd;
  j["seed"] = seed;
  j["n"] = ds.n();
  j["p"] = ds.p();
  if (env) {
    j["bias_rate"] = env->bias_rate;
    j["vb_fraction"] = env->vb_fraction;
  }
  if (ds.truth) j["truth"] = truth_to_json(*ds.truth);
  std::ofstream f(path);
  if (!f) throw IngestionError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

inline void write_fit_json(const FitResult& fr, const std::string& path) {
  nlohmann::json j;
  j["beta"] = std::vector<double>(fr.beta.begin(), fr.beta.end());
  j["weights"] = std::vector<double>(fr.weights.w.begin(), fr.weights.w.end());
  j["converged"] = fr.converged;
  j["iters_used"] = fr.iters_used;
  j["loss_trace"] = fr.loss_trace;
  std::ofstream f(path);
  if (!f) throw IngestionError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

inline FitResult read_fit_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IngestionError("cannot open: " + path);
  nlohmann::json j;
  f >> j;
  FitResult fr;
  auto b = j.at("beta").get<std::vector<double>>();
  fr.beta = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
  auto w = j.at("weights").get<std::vector<double>>();
  fr.weights.w = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  fr.converged = j.value("converged", false);
  fr.iters_used = j.value("iters_used", 0);
  fr.loss_trace = j.value("loss_trace", std::vector<double>{});
  return fr;
}

}  // namespace io
}  // namespace dwr
