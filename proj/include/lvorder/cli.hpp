#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lvorder/evaluate.hpp"
#include "lvorder/io.hpp"
#include "lvorder/ordering.hpp"
#include "lvorder/parallel.hpp"
#include "lvorder/simulate.hpp"

namespace lvorder::cli {

struct RunConfig {
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  std::vector<std::size_t> samples{500, 1000, 2000};
  std::optional<std::size_t> permutation_shuffles;  // unset: gamma null
  std::string spec = "paper-benchmark";              // builtin name or JSON path
  std::string out;
  std::size_t threads = default_threads();

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
    if (trials < 1) throw InvalidArgument("trials must be at least 1");
    if (samples.empty()) throw InvalidArgument("need at least one sample size");
    for (auto n : samples)
      if (n < kMinHsicSamples)
        throw InvalidArgument("n below minimum " + std::to_string(kMinHsicSamples) + " (got " + std::to_string(n) + ")");
    if (permutation_shuffles && *permutation_shuffles == 0) throw InvalidArgument("permutation null needs shuffles > 0");
  }
};

// "500,1000,2000" -> {500, 1000, 2000}
inline std::vector<std::size_t> parse_samples(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw InvalidArgument("bad sample size '" + item + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("empty sample list");
  return out;
}

// "off" -> unset, otherwise a positive shuffle count.
inline std::optional<std::size_t> parse_permutation_null(const std::string& s) {
  if (s == "off") return std::nullopt;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size() && v > 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw InvalidArgument("--permutation-null expects a positive count or 'off', got '" + s + "'");
}

// Overlays fields present in a JSON config document.
inline void apply_config_json(RunConfig& cfg, const json& j) {
  try {
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
    if (j.contains("samples")) cfg.samples = j.at("samples").get<std::vector<std::size_t>>();
    if (j.contains("spec")) cfg.spec = j.at("spec").get<std::string>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("permutation_null")) {
      const auto& v = j.at("permutation_null");
      cfg.permutation_shuffles = v.is_string() ? parse_permutation_null(v.get<std::string>())
                                               : std::optional<std::size_t>(v.get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config: ") + e.what());
  }
}

inline ModelSpec load_spec(const std::string& spec) {
  if (is_builtin_spec(spec)) return builtin_spec(spec);
  return model_spec_from_json(read_json_file(spec));
}

// data.csv -> data.truth.json
inline std::string truth_path_for(const std::string& csv_path) {
  const auto slash = csv_path.find_last_of('/');
  const auto dot = csv_path.find_last_of('.');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? csv_path.substr(0, dot) : csv_path) + ".truth.json";
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Writes the simulated CSV to cfg.out and the ground truth next to it.
inline int cmd_simulate(const RunConfig& cfg, std::size_t n, std::ostream& log, std::ostream& err) {
  try {
    if (n < kMinHsicSamples) throw InvalidArgument("n below minimum " + std::to_string(kMinHsicSamples));
    if (cfg.out.empty()) throw InvalidArgument("--out is required");
    const ModelSpec spec = load_spec(cfg.spec);
    const GeneratedData d = generate(spec, n, cfg.seed);
    std::ostringstream csv;
    write_csv(csv, d.raw, d.truth.ids);
    write_text_file(cfg.out, csv.str());
    json truth = to_json(d.truth);
    truth["spec"] = to_json(spec);
    truth["n"] = n;
    truth["seed"] = cfg.seed;
    const std::string truth_path = truth_path_for(cfg.out);
    write_text_file(truth_path, dump(truth));
    log << "wrote " << n << " samples of " << spec.variables() << " variables to " << cfg.out << " (truth: " << truth_path
        << ")\n";
    return 0;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return 1;
  }
}

inline int cmd_discover(const RunConfig& cfg, const std::string& input, std::ostream& log, std::ostream& err) {
  try {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
    std::ifstream in(input);
    if (!in) throw Error("cannot open '" + input + "'");
    auto [values, names] = read_csv(in);
    if (names.size() < 2) throw InvalidArgument("need at least 2 columns, found " + std::to_string(names.size()));
    if (values.cols() < static_cast<Eigen::Index>(kMinHsicSamples))
      throw InvalidArgument("need at least " + std::to_string(kMinHsicSamples) + " rows, found " +
                            std::to_string(values.cols()));
    const DataMatrix x(std::move(values), names);
    for (std::size_t i = 0; i < x.variables(); ++i)
      if (detail::row_degenerate(x.row(i), x.means()(static_cast<Eigen::Index>(i))))
        throw DegenerateInput("column '" + x.id(i) + "' is constant", x.id(i));

    OrderingOptions opt;
    opt.alpha = cfg.alpha;
    opt.hsic.permutation_shuffles = cfg.permutation_shuffles;
    opt.hsic.seed = cfg.seed;
    const OrderingResult r = discover(x, opt);
    json j = to_json(r);
    j["variables"] = x.ids();
    j["alpha"] = cfg.alpha;
    j["threshold"] = bonferroni_threshold(cfg.alpha, x.variables());
    j["samples"] = x.samples();
    if (cfg.out.empty())
      log << dump(j);
    else
      write_text_file(cfg.out, dump(j));
    return 0;
  } catch (const std::exception& e) {
    err << "discover: " << e.what() << '\n';
    return 1;
  }
}

// Writes the report JSON to cfg.out (if set) and the rendered table to
// cfg.out + ".txt"; prints the table. Non-zero only if nothing succeeded.
inline int cmd_benchmark(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    cfg.validate();
    const ModelSpec spec = load_spec(cfg.spec);
    BenchmarkConfig bc;
    bc.samples = cfg.samples;
    bc.trials = cfg.trials;
    bc.alpha = cfg.alpha;
    bc.seed = cfg.seed;
    bc.hsic.permutation_shuffles = cfg.permutation_shuffles;
    bc.threads = cfg.threads;
    const BenchmarkReport report = run_benchmark(spec, bc);
    json j = to_json(report);
    j["config"]["spec"] = cfg.spec;
    const std::string table = render_table(report);
    if (!cfg.out.empty()) {
      write_text_file(cfg.out, dump(j));
      write_text_file(cfg.out + ".txt", table);
    }
    log << table;
    if (report.failures == report.records.size()) {
      err << "benchmark: every run failed; first error: " << report.records.front().error << '\n';
      return 1;
    }
    if (report.failures) err << "benchmark: " << report.failures << " run(s) failed\n";
    return 0;
  } catch (const std::exception& e) {
    err << "benchmark: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lvorder::cli
