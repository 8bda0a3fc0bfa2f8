#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lvorder/ordering.hpp"
#include "lvorder/parallel.hpp"
#include "lvorder/seeding.hpp"
#include "lvorder/simulate.hpp"

namespace lvorder {

using OrderedPair = std::pair<std::string, std::string>;  // (earlier, later)

// Every pair the partial order places strictly one before the other. Pairs
// inside `middle` are not ordered.
inline std::set<OrderedPair> estimated_ordered_pairs(const OrderingResult& r) {
  std::set<OrderedPair> out;
  for (std::size_t a = 0; a < r.k_head.size(); ++a) {
    for (std::size_t b = a + 1; b < r.k_head.size(); ++b) out.emplace(r.k_head[a], r.k_head[b]);
    for (const auto& m : r.middle) out.emplace(r.k_head[a], m);
    for (const auto& t : r.k_tail) out.emplace(r.k_head[a], t);
  }
  for (const auto& m : r.middle)
    for (const auto& t : r.k_tail) out.emplace(m, t);
  for (std::size_t a = 0; a < r.k_tail.size(); ++a)
    for (std::size_t b = a + 1; b < r.k_tail.size(); ++b) out.emplace(r.k_tail[a], r.k_tail[b]);
  return out;
}

// Share of estimated pairs that do not contradict the true ancestor relation.
// A pair with no directed path either way counts as correct. Empty when no
// pair is estimated.
inline std::optional<double> pairwise_precision(const OrderingResult& r, const GroundTruth& truth) {
  const auto pairs = estimated_ordered_pairs(r);
  if (pairs.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (const auto& [i, j] : pairs)
    if (!truth.ancestor(static_cast<Eigen::Index>(truth.index_of(j)), static_cast<Eigen::Index>(truth.index_of(i))))
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// Share of true ancestor pairs not sharing a confounder that the estimate
// orders correctly. Empty when the truth has no such pair.
inline std::optional<double> pairwise_recall(const OrderingResult& r, const GroundTruth& truth) {
  const auto pairs = estimated_ordered_pairs(r);
  const auto p = static_cast<Eigen::Index>(truth.ids.size());
  std::size_t total = 0, found = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!truth.ancestor(i, j) || truth.shares_confounder(i, j)) continue;
      ++total;
      if (pairs.count({truth.ids[static_cast<std::size_t>(i)], truth.ids[static_cast<std::size_t>(j)]})) ++found;
    }
  if (total == 0) return std::nullopt;
  return static_cast<double>(found) / static_cast<double>(total);
}

// RMSE over the (child, parent) strengths the method estimated, true zeros
// included. Empty when nothing was estimated.
inline std::optional<double> strength_rmse(const OrderingResult& r, const GroundTruth& truth) {
  if (r.strengths.empty()) return std::nullopt;
  double ss = 0.0;
  for (const auto& [key, value] : r.strengths) {
    const double b = truth.B_true(static_cast<Eigen::Index>(truth.index_of(key.first)),
                                  static_cast<Eigen::Index>(truth.index_of(key.second)));
    ss += (value - b) * (value - b);
  }
  return std::sqrt(ss / static_cast<double>(r.strengths.size()));
}

struct TrialRecord {
  std::size_t n = 0;
  std::size_t trial = 0;
  std::string method;
  bool failed = false;
  std::string error;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> rmse;
  std::size_t estimated_pairs = 0;
};

struct MethodSummary {
  std::string method;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t failures = 0;
  // unweighted means over trials where the metric is defined
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> rmse;
  std::size_t precision_trials = 0;
  std::size_t recall_trials = 0;
  std::size_t rmse_trials = 0;
};

struct BenchmarkConfig {
  std::vector<std::size_t> samples{500, 1000, 2000};
  std::size_t trials = 100;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  HsicOptions hsic;
  std::size_t threads = 1;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<MethodSummary> summaries;  // method-major, then samples order
  std::vector<TrialRecord> records;      // (n, trial, method) order
  std::size_t failures = 0;

  const MethodSummary& summary(const std::string& method, std::size_t n) const {
    for (const auto& s : summaries)
      if (s.method == method && s.n == n) return s;
    throw InvalidArgument("no summary for " + method + " at n=" + std::to_string(n));
  }
};

inline const std::vector<std::string>& benchmark_methods() {
  static const std::vector<std::string> m{"discover", "direct_lingam"};
  return m;
}

inline std::uint64_t data_seed(std::uint64_t seed, std::size_t n, std::size_t trial) {
  return derive_seed(seed, {tag_of("data"), n, trial});
}

inline std::uint64_t method_seed(std::uint64_t seed, std::size_t n, std::size_t trial, const std::string& method) {
  return derive_seed(seed, {tag_of("method"), n, trial, tag_of(method.c_str())});
}

inline TrialRecord score_trial(const std::string& method, std::size_t n, std::size_t trial,
                               const std::function<OrderingResult()>& run, const GroundTruth& truth) {
  TrialRecord rec;
  rec.n = n;
  rec.trial = trial;
  rec.method = method;
  try {
    const OrderingResult r = run();
    rec.precision = pairwise_precision(r, truth);
    rec.recall = pairwise_recall(r, truth);
    rec.rmse = strength_rmse(r, truth);
    rec.estimated_pairs = estimated_ordered_pairs(r).size();
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

inline std::vector<MethodSummary> summarize(const BenchmarkConfig& cfg, const std::vector<TrialRecord>& records) {
  std::vector<MethodSummary> out;
  for (const auto& method : benchmark_methods())
    for (auto n : cfg.samples) {
      MethodSummary s;
      s.method = method;
      s.n = n;
      double sp = 0.0, sr = 0.0, se = 0.0;
      for (const auto& r : records) {
        if (r.method != method || r.n != n) continue;
        ++s.trials;
        if (r.failed) {
          ++s.failures;
          continue;
        }
        if (r.precision) sp += *r.precision, ++s.precision_trials;
        if (r.recall) sr += *r.recall, ++s.recall_trials;
        if (r.rmse) se += *r.rmse, ++s.rmse_trials;
      }
      if (s.precision_trials) s.precision = sp / static_cast<double>(s.precision_trials);
      if (s.recall_trials) s.recall = sr / static_cast<double>(s.recall_trials);
      if (s.rmse_trials) s.rmse = se / static_cast<double>(s.rmse_trials);
      out.push_back(s);
    }
  return out;
}

// For every sample size and trial: generate data, run discover and the
// baseline, score both. Trials run in parallel; results do not depend on the
// worker count.
inline BenchmarkReport run_benchmark(const ModelSpec& spec, const BenchmarkConfig& cfg) {
  spec.validate();
  if (cfg.trials < 1) throw InvalidArgument("trials must be at least 1");
  if (cfg.samples.empty()) throw InvalidArgument("need at least one sample size");
  for (auto n : cfg.samples)
    if (n < kMinHsicSamples) throw InvalidArgument("sample size below minimum " + std::to_string(kMinHsicSamples));
  bonferroni_threshold(cfg.alpha, spec.variables());

  const auto& methods = benchmark_methods();
  const std::size_t units = cfg.samples.size() * cfg.trials;
  std::vector<TrialRecord> records(units * methods.size());
  parallel_for(units, cfg.threads, [&](std::size_t u) {
    const std::size_t n = cfg.samples[u / cfg.trials];
    const std::size_t trial = u % cfg.trials;
    const GeneratedData d = generate(spec, n, data_seed(cfg.seed, n, trial));
    auto options = [&](const std::string& method) {
      OrderingOptions opt;
      opt.alpha = cfg.alpha;
      opt.hsic = cfg.hsic;
      opt.hsic.seed = method_seed(cfg.seed, n, trial, method);
      return opt;
    };
    // With the gamma null on full samples no test consumes its seed, so the
    // two methods can share their common top-down prefix.
    std::optional<MethodPair> both;
    if (!cfg.hsic.permutation_shuffles && !cfg.hsic.subsample_cap) {
      try {
        both = discover_and_baseline(d.data, options("discover"));
      } catch (const std::exception&) {
        // rerun separately below so each method reports its own failure
      }
    }
    TrialRecord* out = &records[u * methods.size()];
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const bool disc = methods[m] == "discover";
      auto run = [&]() -> OrderingResult {
        if (both) return disc ? both->discover : both->baseline;
        const OrderingOptions opt = options(methods[m]);
        return disc ? discover(d.data, opt) : direct_lingam_baseline(d.data, opt);
      };
      out[m] = score_trial(methods[m], n, trial, run, d.truth);
    }
  });

  BenchmarkReport report;
  report.config = cfg;
  report.records = std::move(records);
  report.summaries = summarize(cfg, report.records);
  for (const auto& r : report.records) report.failures += r.failed ? 1 : 0;
  return report;
}

}  // namespace lvorder
