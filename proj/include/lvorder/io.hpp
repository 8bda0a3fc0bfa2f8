#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lvorder/data_matrix.hpp"
#include "lvorder/error.hpp"
#include "lvorder/evaluate.hpp"
#include "lvorder/ordering.hpp"
#include "lvorder/simulate.hpp"

namespace lvorder {

using json = nlohmann::json;

struct ParseError : Error {
  using Error::Error;
};

// ---- CSV: header of variable names, one sample per row ----

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// Returns the raw (uncentered) p x n values and the column names.
inline std::pair<RowMatrix, std::vector<std::string>> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> names;
  for (auto f : detail::split_commas(line)) names.emplace_back(f);
  for (std::size_t c = 0; c < names.size(); ++c)
    if (names[c].empty()) throw ParseError("CSV header: column " + std::to_string(c + 1) + " has no name");

  std::vector<std::vector<double>> cols(names.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::split_commas(line);
    if (fields.size() != names.size())
      throw ParseError("CSV row " + std::to_string(row) + ": expected " + std::to_string(names.size()) +
                       " fields, found " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto f = fields[c];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ParseError("CSV row " + std::to_string(row) + ", column '" + names[c] + "': '" + std::string(f) +
                         "' is not a number");
      cols[c].push_back(v);
    }
  }
  RowMatrix values(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(row));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < row; ++r) values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = cols[c][r];
  return {std::move(values), std::move(names)};
}

inline void write_csv(std::ostream& out, const RowMatrix& values, const std::vector<std::string>& names) {
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (Eigen::Index s = 0; s < values.cols(); ++s) {
    for (Eigen::Index v = 0; v < values.rows(); ++v) out << (v ? "," : "") << format_number(values(v, s));
    out << '\n';
  }
}

// ---- JSON ----

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const char* field, Eigen::Index rows_expected = -1) {
  if (!j.is_array()) throw ParseError(std::string("'") + field + "' must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(std::max<Eigen::Index>(rows_expected, 0), 0);
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
      throw ParseError(std::string("'") + field + "' rows must be arrays of equal length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!r[static_cast<std::size_t>(c)].is_number())
        throw ParseError(std::string("'") + field + "' entries must be numbers");
      m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

inline json to_json(const NoiseSpec& s) {
  json j{{"kind", to_string(s.kind)}, {"target_sd", s.target_sd}};
  if (s.is_mixture()) j["params"] = {{"weights", s.weights}, {"means", s.means}, {"sds", s.sds}};
  return j;
}

inline NoiseSpec noise_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ParseError("noise spec needs a 'kind'");
  NoiseSpec s = NoiseSpec::defaults(noise_kind_from_string(j.at("kind").get<std::string>()));
  if (j.contains("target_sd")) s.target_sd = j.at("target_sd").get<double>();
  if (j.contains("params") && s.is_mixture()) {
    const auto& p = j.at("params");
    if (p.contains("weights")) s.weights = p.at("weights").get<std::vector<double>>();
    if (p.contains("means")) s.means = p.at("means").get<std::vector<double>>();
    if (p.contains("sds")) s.sds = p.at("sds").get<std::vector<double>>();
  }
  return s;
}

inline json to_json(const ModelSpec& s) {
  json j;
  j["B"] = matrix_to_json(s.B);
  j["Lambda"] = matrix_to_json(s.Lambda);
  j["noise"] = json::array();
  for (const auto& n : s.noise) j["noise"].push_back(to_json(n));
  j["confounder_noise"] = json::array();
  for (const auto& n : s.confounder_noise) j["confounder_noise"].push_back(to_json(n));
  j["causal_order"] = s.causal_order;
  j["variable_names"] = s.ids();
  return j;
}

inline ModelSpec model_spec_from_json(const json& j) {
  try {
    ModelSpec s;
    for (const char* f : {"B", "noise", "causal_order"})
      if (!j.contains(f)) throw ParseError(std::string("model spec is missing '") + f + "'");
    s.B = matrix_from_json(j.at("B"), "B");
    s.Lambda = j.contains("Lambda") ? matrix_from_json(j.at("Lambda"), "Lambda", s.B.rows())
                                    : Eigen::MatrixXd(s.B.rows(), 0);
    if (s.Lambda.rows() == 0) s.Lambda.resize(s.B.rows(), 0);
    for (const auto& n : j.at("noise")) s.noise.push_back(noise_from_json(n));
    if (j.contains("confounder_noise"))
      for (const auto& n : j.at("confounder_noise")) s.confounder_noise.push_back(noise_from_json(n));
    s.causal_order = j.at("causal_order").get<std::vector<std::size_t>>();
    if (j.contains("variable_names")) s.names = j.at("variable_names").get<std::vector<std::string>>();
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model spec: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid model spec: ") + e.what());
  }
}

inline json to_json(const GroundTruth& t) {
  json j;
  j["variables"] = t.ids;
  j["B_true"] = matrix_to_json(t.B_true);
  j["Lambda"] = matrix_to_json(t.Lambda);
  json anc = json::array(), shared = json::array();
  const auto p = static_cast<Eigen::Index>(t.ids.size());
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index k = 0; k < p; ++k) {
      if (t.ancestor(i, k)) anc.push_back({t.ids[static_cast<std::size_t>(i)], t.ids[static_cast<std::size_t>(k)]});
      if (i < k && t.shares_confounder(i, k))
        shared.push_back({t.ids[static_cast<std::size_t>(i)], t.ids[static_cast<std::size_t>(k)]});
    }
  j["ancestor_pairs"] = std::move(anc);
  j["shares_confounder_pairs"] = std::move(shared);
  return j;
}

inline json to_json(const OrderingResult& r) {
  json j;
  j["k_head"] = r.k_head;
  j["middle"] = r.middle;
  j["k_tail"] = r.k_tail;
  j["strengths"] = json::array();
  for (const auto& [key, v] : r.strengths) j["strengths"].push_back({{"child", key.first}, {"parent", key.second}, {"value", v}});
  j["trace"] = json::array();
  for (const auto& t : r.trace) {
    json e{{"phase", to_string(t.phase)}, {"iteration", t.iteration}, {"threshold", t.threshold},
           {"outcome", to_string(t.outcome)}};
    if (!t.selected.empty()) {
      e["selected"] = t.selected;
      e["selected_p"] = t.selected_p;
    }
    e["candidates"] = json::array();
    for (const auto& c : t.candidates)
      e["candidates"].push_back({{"id", c.id}, {"combined_statistic", c.combined_statistic}, {"combined_p", c.combined_p}});
    j["trace"].push_back(std::move(e));
  }
  return j;
}

inline OrderingResult ordering_from_json(const json& j) {
  OrderingResult r;
  r.k_head = j.at("k_head").get<std::vector<std::string>>();
  r.middle = j.at("middle").get<std::vector<std::string>>();
  r.k_tail = j.at("k_tail").get<std::vector<std::string>>();
  for (const auto& s : j.at("strengths"))
    r.strengths[{s.at("child").get<std::string>(), s.at("parent").get<std::string>()}] = s.at("value").get<double>();
  return r;
}

namespace detail {
inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace detail

inline const char* kPrecisionConvention =
    "an estimated pair (i, j) is correct unless j is a true ancestor of i; pairs with no directed path either "
    "way count as correct";

inline json to_json(const BenchmarkReport& r) {
  json j;
  // thread count is deliberately absent: reports must not depend on it
  j["config"] = {{"samples", r.config.samples},
                 {"trials", r.config.trials},
                 {"alpha", r.config.alpha},
                 {"seed", r.config.seed},
                 {"permutation_null", r.config.hsic.permutation_shuffles ? json(*r.config.hsic.permutation_shuffles)
                                                                          : json("off")}};
  j["precision_convention"] = kPrecisionConvention;
  j["failures"] = r.failures;
  j["summaries"] = json::array();
  for (const auto& s : r.summaries)
    j["summaries"].push_back({{"method", s.method},
                              {"n", s.n},
                              {"trials", s.trials},
                              {"failures", s.failures},
                              {"precision", detail::optional_number(s.precision)},
                              {"recall", detail::optional_number(s.recall)},
                              {"rmse", detail::optional_number(s.rmse)},
                              {"precision_trials", s.precision_trials},
                              {"recall_trials", s.recall_trials},
                              {"rmse_trials", s.rmse_trials}});
  j["trials"] = json::array();
  for (const auto& t : r.records) {
    json e{{"n", t.n},
           {"trial", t.trial},
           {"method", t.method},
           {"failed", t.failed},
           {"precision", detail::optional_number(t.precision)},
           {"recall", detail::optional_number(t.recall)},
           {"rmse", detail::optional_number(t.rmse)},
           {"estimated_pairs", t.estimated_pairs}};
    if (t.failed) e["error"] = t.error;
    j["trials"].push_back(std::move(e));
  }
  return j;
}

// Methods x sample sizes, one block per metric.
inline std::string render_table(const BenchmarkReport& r) {
  std::ostringstream out;
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v)
      s << std::fixed << std::setprecision(3) << *v;
    else
      s << "-";
    return s.str();
  };
  struct Metric {
    const char* title;
    std::optional<double> MethodSummary::*field;
  };
  for (const Metric& m : {Metric{"Precision", &MethodSummary::precision}, Metric{"Recall", &MethodSummary::recall},
                          Metric{"RMSE", &MethodSummary::rmse}}) {
    out << m.title << '\n';
    out << std::left << std::setw(16) << "method";
    for (auto n : r.config.samples) out << std::right << std::setw(10) << n;
    out << '\n';
    for (const auto& method : benchmark_methods()) {
      out << std::left << std::setw(16) << method;
      for (auto n : r.config.samples) out << std::right << std::setw(10) << cell(r.summary(method, n).*(m.field));
      out << '\n';
    }
    out << '\n';
  }
  out << "trials per cell: " << r.config.trials << ", failed runs: " << r.failures << '\n';
  out << "precision: " << kPrecisionConvention << '\n';
  return out.str();
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace lvorder
