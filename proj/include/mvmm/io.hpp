#pragma once

// CSV ingestion, deterministic number formatting and JSON documents for
// models, block structures and selection reports.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mvmm/errors.hpp"
#include "mvmm/laplacian.hpp"
#include "mvmm/mvmm_core.hpp"
#include "mvmm/selection.hpp"
#include "mvmm/sim.hpp"

namespace mvmm {

using nlohmann::json;

/// Shortest representation that round-trips; "NA" for NaN.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  const auto res = std::from_chars(b, e, v);
  return res.ec == std::errc() && res.ptr == e && std::isfinite(v);
}

}  // namespace detail

struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;
};

/// Numeric CSV. With header == true the first line holds column names;
/// otherwise a first line that does not parse as numbers is taken as a
/// header. Every cell must be a finite number.
inline CsvTable read_csv(const std::string& path, std::optional<bool> header = true) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.empty()) throw InputError(path + ": file is empty");
  bool has_header = header.value_or(false);
  if (!header) {
    double v;
    for (const auto& c : rows.front())
      if (!detail::parse_double(c, v)) has_header = true;
  }
  CsvTable t;
  std::size_t first = 0;
  if (has_header) {
    t.header = rows.front();
    first = 1;
  }
  const std::size_t cols = rows.front().size();
  t.values.resize(static_cast<Index>(rows.size() - first), static_cast<Index>(cols));
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw InputError(path + ": row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                       " cells, expected " + std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      double v;
      if (!detail::parse_double(rows[r][c], v))
        throw InputError(path + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                         ": '" + rows[r][c] + "' is not a finite number");
      t.values(static_cast<Index>(r - first), static_cast<Index>(c)) = v;
    }
  }
  return t;
}

/// One CSV per view; all views must have the same number of rows.
inline MultiViewData read_views(const std::vector<std::string>& paths) {
  if (paths.empty()) throw InputError("no view files given");
  MultiViewData data;
  for (const auto& p : paths) {
    CsvTable t = read_csv(p, true);
    if (t.values.rows() == 0) throw InputError(p + ": no observations");
    if (!data.empty() && t.values.rows() != data.front().rows())
      throw InputError(p + ": has " + std::to_string(t.values.rows()) + " rows but '" + paths.front() + "' has " +
                       std::to_string(data.front().rows()));
    data.push_back(std::move(t.values));
  }
  return data;
}

inline void write_matrix_csv(std::ostream& os, const MatrixXd& m, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  if (!header.empty()) os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

inline std::vector<std::string> feature_header(Index d, const std::string& prefix = "x") {
  std::vector<std::string> h;
  for (Index j = 0; j < d; ++j) h.push_back(prefix + std::to_string(j + 1));
  return h;
}

inline json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline json table_json(const ProbTable& p) { return {{"shape", p.shape()}, {"values", vec_json(p.values())}}; }

inline json matrix_json(const MatrixXd& m) {
  VectorXd v(m.size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
  return {{"shape", {m.rows(), m.cols()}}, {"values", vec_json(v)}};
}

inline MatrixXd json_matrix(const json& j) {
  const auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2) throw InputError("expected a two-axis table");
  const VectorXd v = json_vec(j.at("values"));
  if (v.size() != shape[0] * shape[1]) throw InputError("table value count does not match its shape");
  MatrixXd m(shape[0], shape[1]);
  for (Index r = 0; r < shape[0]; ++r)
    for (Index c = 0; c < shape[1]; ++c) m(r, c) = v(r * shape[1] + c);
  return m;
}

inline json model_json(const MvmmModel& m) {
  json views = json::array();
  for (const auto& v : m.views) {
    json comps = json::array();
    for (const auto& c : v.components) comps.push_back({{"mean", vec_json(c.mean)}, {"variance", vec_json(c.variance)}});
    views.push_back({{"components", comps}});
  }
  return {{"views", views}, {"pi", table_json(m.pi)}};
}

inline MvmmModel model_from_json(const json& j) {
  try {
    MvmmModel m;
    for (const auto& v : j.at("views")) {
      ViewModel vm;
      for (const auto& c : v.at("components"))
        vm.components.push_back({json_vec(c.at("mean")), json_vec(c.at("variance"))});
      m.views.push_back(std::move(vm));
    }
    const auto& p = j.at("pi");
    m.pi = ProbTable::normalized(p.at("shape").get<std::vector<Index>>(), json_vec(p.at("values")));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model document: ") + e.what());
  }
}

inline json block_structure_json(const BlockStructure& bs) {
  json j{{"num_blocks", bs.num_blocks}, {"degenerate", bs.degenerate}, {"support_tol", bs.support_tol}};
  if (bs.labels.size() >= 2) {
    j["row_block"] = bs.row_block();
    j["col_block"] = bs.col_block();
    j["zero_rows"] = bs.zero_rows();
    j["zero_cols"] = bs.zero_cols();
    j["row_perm"] = bs.row_perm();
    j["col_perm"] = bs.col_perm();
  }
  j["labels"] = bs.labels;
  return j;
}

inline void write_report_csv(std::ostream& os, const SelectionReport& rep) {
  os << "hyperparam,bic,log_lik,dof,support,num_blocks,n,ok,chosen\n";
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    os << format_double(r.hyperparam) << ',' << (r.ok ? format_double(r.bic) : "NA") << ','
       << (r.ok ? format_double(r.fit.log_lik) : "NA") << ',' << r.fit.dof << ',' << r.fit.support << ','
       << r.fit.num_blocks << ',' << r.fit.n << ',' << (r.ok ? 1 : 0) << ','
       << (static_cast<Index>(i) == rep.chosen ? 1 : 0) << '\n';
  }
}

inline json report_json(const SelectionReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    json row{{"hyperparam", r.hyperparam}, {"ok", r.ok}, {"dof", r.fit.dof}, {"support", r.fit.support},
             {"num_blocks", r.fit.num_blocks}, {"n", r.fit.n}};
    if (r.ok) {
      row["bic"] = r.bic;
      row["log_lik"] = r.fit.log_lik;
    } else {
      row["error"] = r.error;
    }
    rows.push_back(row);
  }
  return {{"candidates", rows}, {"chosen", rep.chosen}};
}

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "rep,method,n,hyperparam,metric,value\n";
  for (const auto& r : rows)
    os << r.rep << ',' << r.method << ',' << r.n << ',' << format_double(r.hyperparam) << ',' << r.metric << ','
       << format_double(r.value) << '\n';
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace mvmm
