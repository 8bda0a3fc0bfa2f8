#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lvorder/data_matrix.hpp"
#include "lvorder/error.hpp"
#include "lvorder/independence.hpp"
#include "lvorder/regression.hpp"
#include "lvorder/seeding.hpp"

namespace lvorder {

struct OrderingOptions {
  double alpha = 0.05;
  double condition_cap = kDefaultConditionCap;
  HsicOptions hsic;
  // A residual whose norm is below this fraction of its source variable's
  // norm is treated as identically zero.
  double residual_tolerance = 1e-10;
};

enum class Phase { top_down, bottom_up };

enum class StepOutcome {
  appended,            // candidate accepted, search continues
  threshold_hit,       // best combined p fell below the corrected level
  exhausted,           // top-down ordered everything
  too_few_candidates,  // bottom-up left with fewer than three unordered
  skipped,             // bottom-up not run: top-down left at most two
};

inline const char* to_string(Phase p) { return p == Phase::top_down ? "top_down" : "bottom_up"; }

inline const char* to_string(StepOutcome o) {
  switch (o) {
    case StepOutcome::appended: return "appended";
    case StepOutcome::threshold_hit: return "threshold-hit";
    case StepOutcome::exhausted: return "exhausted";
    case StepOutcome::too_few_candidates: return "too-few-candidates";
    case StepOutcome::skipped: return "skipped";
  }
  return "unknown";
}

struct CandidateScore {
  std::string id;
  double combined_statistic = 0.0;
  double combined_p = 1.0;
};

struct TraceEntry {
  Phase phase = Phase::top_down;
  std::size_t iteration = 0;
  std::vector<CandidateScore> candidates;
  std::string selected;  // empty when no test was run
  double selected_p = 1.0;
  double threshold = 0.0;
  StepOutcome outcome = StepOutcome::appended;
};

using StrengthMap = std::map<std::pair<std::string, std::string>, double>;  // (child, parent) -> b

struct OrderingResult {
  std::vector<std::string> k_head;
  std::vector<std::string> middle;
  std::vector<std::string> k_tail;
  StrengthMap strengths;
  std::vector<TraceEntry> trace;
};

struct TopDownResult {
  std::vector<std::string> k_head;
  DataMatrix residuals;  // remaining variables, all head variables regressed out
  std::vector<TraceEntry> trace;
};

struct BottomUpResult {
  std::vector<std::string> k_tail;
  std::vector<TraceEntry> trace;
};

namespace detail {

inline void require_algorithm_input(const DataMatrix& x) {
  if (x.variables() < 2) throw InvalidArgument("need at least 2 variables");
  if (x.samples() < kMinHsicSamples)
    throw InvalidArgument("need at least " + std::to_string(kMinHsicSamples) + " samples");
  for (std::size_t i = 0; i < x.variables(); ++i)
    if (row_degenerate(x.row(i), x.means()(static_cast<Eigen::Index>(i))))
      throw DegenerateInput("variable '" + x.id(i) + "' has zero variance", x.id(i));
}

inline bool effectively_zero(const Eigen::Ref<const Eigen::RowVectorXd>& r,
                             const Eigen::Ref<const Eigen::RowVectorXd>& source, double tol) {
  return r.norm() <= tol * source.norm();
}

// Rows sorted by id so scoring and tie-breaking follow variable-id order.
inline std::vector<std::size_t> by_id(const DataMatrix& x, std::vector<std::size_t> rows) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return x.id(a) < x.id(b); });
  return rows;
}

// Builds kernel matrices on the (optionally subsampled) columns shared by all
// tests of one scoring call.
class GramFactory {
 public:
  GramFactory(std::size_t n, const HsicOptions& opt, std::uint64_t seed) {
    if (opt.subsample_cap && n > *opt.subsample_cap) idx_ = subsample_indices(n, *opt.subsample_cap, seed);
  }

  CenteredGram operator()(const Eigen::Ref<const Eigen::RowVectorXd>& v) const {
    if (idx_.empty()) return CenteredGram(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    std::vector<double> s;
    s.reserve(idx_.size());
    for (auto i : idx_) s.push_back(v(static_cast<Eigen::Index>(i)));
    return CenteredGram(s);
  }

 private:
  std::vector<std::size_t> idx_;
};

inline HsicOptions test_options(const HsicOptions& base, std::uint64_t seed) {
  HsicOptions o = base;
  o.seed = seed;
  return o;
}

inline std::uint64_t id_tag(const std::string& s) { return tag_of(s.c_str()); }

inline HsicResult zero_residual_result() {
  HsicResult r;
  r.degenerate = true;
  return r;
}

// Exogeneity score of row j against the other active rows of `work`.
inline IndependenceReport score_exogenous(const DataMatrix& original, const RowMatrix& work, std::size_t j,
                                          const std::vector<std::size_t>& active, const OrderingOptions& opt,
                                          std::uint64_t iteration_tag) {
  const auto xj = work.row(static_cast<Eigen::Index>(j));
  const auto& jid = original.id(j);
  if (effectively_zero(xj, original.row(j), opt.residual_tolerance))
    throw DegenerateInput("variable '" + jid + "' has zero variance after regressing out earlier variables", jid);
  const double sq = xj.squaredNorm();
  const std::uint64_t seed = derive_seed(opt.hsic.seed, {tag_of("exogenous"), iteration_tag, id_tag(jid)});
  GramFactory gram(static_cast<std::size_t>(work.cols()), opt.hsic, seed);
  const CenteredGram gj = gram(xj);
  std::vector<std::pair<std::string, HsicResult>> tests;
  for (std::size_t i : active) {
    if (i == j) continue;
    const Eigen::RowVectorXd r = simple_residual(work.row(static_cast<Eigen::Index>(i)), xj, sq);
    HsicResult h = effectively_zero(r, original.row(i), opt.residual_tolerance)
                       ? zero_residual_result()
                       : hsic_with(gj, gram(r), test_options(opt.hsic, derive_seed(seed, {id_tag(original.id(i))})));
    tests.emplace_back(original.id(i), h);
  }
  return combine_report(jid, std::move(tests));
}

// Sink score of row j: residual of j on all other present rows, tested
// against each of those regressors.
// `cache` holds full-sample grams of the original rows, filled on demand; it
// is bypassed when tests subsample.
using GramCache = std::map<std::size_t, CenteredGram>;

inline IndependenceReport score_sink(const DataMatrix& x, const Eigen::MatrixXd& cov, std::size_t j,
                                     const std::vector<std::size_t>& present, const OrderingOptions& opt,
                                     std::uint64_t iteration_tag, GramCache* cache = nullptr) {
  const auto& jid = x.id(j);
  std::vector<std::size_t> regressors;
  for (auto k : present)
    if (k != j) regressors.push_back(k);
  const Eigen::VectorXd beta = regression_coefficients(cov, j, regressors, opt.condition_cap);
  Eigen::RowVectorXd r = x.row(j);
  for (std::size_t a = 0; a < regressors.size(); ++a)
    r -= beta(static_cast<Eigen::Index>(a)) * x.row(regressors[a]);

  std::vector<std::pair<std::string, HsicResult>> tests;
  if (effectively_zero(r, x.row(j), opt.residual_tolerance)) {
    for (auto k : regressors) tests.emplace_back(x.id(k), zero_residual_result());
    return combine_report(jid, std::move(tests));
  }
  const std::uint64_t seed = derive_seed(opt.hsic.seed, {tag_of("sink"), iteration_tag, id_tag(jid)});
  GramFactory gram(x.samples(), opt.hsic, seed);
  const CenteredGram gr = gram(r);
  const bool cached = cache && !opt.hsic.subsample_cap;
  for (auto k : regressors) {
    const auto ts = test_options(opt.hsic, derive_seed(seed, {id_tag(x.id(k))}));
    if (cached) {
      auto it = cache->find(k);
      if (it == cache->end()) it = cache->emplace(k, gram(x.row(k))).first;
      tests.emplace_back(x.id(k), hsic_with(it->second, gr, ts));
    } else {
      tests.emplace_back(x.id(k), hsic_with(gram(x.row(k)), gr, ts));
    }
  }
  return combine_report(jid, std::move(tests));
}

// Highest combined p; exact ties go to the first in the (id-sorted) input.
inline std::size_t argmax_report(const std::vector<IndependenceReport>& reports) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < reports.size(); ++k)
    if (reports[k].combined_p > reports[best].combined_p) best = k;
  return best;
}

inline std::vector<CandidateScore> scores_of(const std::vector<IndependenceReport>& reports) {
  std::vector<CandidateScore> out;
  for (const auto& r : reports) out.push_back({r.candidate, r.combined_statistic, r.combined_p});
  return out;
}

inline TopDownResult top_down(const DataMatrix& x, const OrderingOptions& opt, bool never_stop) {
  require_algorithm_input(x);
  const std::size_t p = x.variables();
  const double threshold = bonferroni_threshold(opt.alpha, p);
  RowMatrix work = x.values();
  std::vector<std::size_t> all(p);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> active = by_id(x, all);

  TopDownResult out;
  for (std::size_t iteration = 0; active.size() >= 2; ++iteration) {
    std::vector<IndependenceReport> reports;
    for (auto j : active) reports.push_back(score_exogenous(x, work, j, active, opt, iteration));
    const std::size_t best = argmax_report(reports);
    const std::size_t m = active[best];

    TraceEntry entry{Phase::top_down, iteration, scores_of(reports), x.id(m), reports[best].combined_p, threshold,
                     StepOutcome::appended};
    if (!never_stop && reports[best].combined_p < threshold) {
      entry.outcome = StepOutcome::threshold_hit;
      out.trace.push_back(std::move(entry));
      break;
    }
    out.k_head.push_back(x.id(m));
    const Eigen::RowVectorXd xm = work.row(static_cast<Eigen::Index>(m));
    const double sq = xm.squaredNorm();
    for (auto i : active)
      if (i != m) work.row(static_cast<Eigen::Index>(i)) = simple_residual(work.row(static_cast<Eigen::Index>(i)), xm, sq);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best));
    if (out.k_head.size() == p - 1) {
      out.k_head.push_back(x.id(active.front()));
      active.clear();
      entry.outcome = StepOutcome::exhausted;
    }
    out.trace.push_back(std::move(entry));
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < p; ++i)
    if (std::find(out.k_head.begin(), out.k_head.end(), x.id(i)) == out.k_head.end()) rest.push_back(i);
  RowMatrix resid(static_cast<Eigen::Index>(rest.size()), work.cols());
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < rest.size(); ++k) {
    resid.row(static_cast<Eigen::Index>(k)) = work.row(static_cast<Eigen::Index>(rest[k]));
    ids.push_back(x.id(rest[k]));
  }
  out.residuals = DataMatrix(std::move(resid), std::move(ids));
  return out;
}

template <class F>
auto with_phase(const char* phase, F&& f) -> decltype(f()) {
  const std::string prefix = std::string(phase) + ": ";
  try {
    return f();
  } catch (const DegenerateInput& e) {
    throw DegenerateInput(prefix + e.what(), e.variable);
  } catch (const SingularMatrix& e) {
    throw SingularMatrix(prefix + e.what(), e.condition);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace detail

// Fisher-combined HSIC score for x_j being exogenous among `active`.
inline IndependenceReport score_exogenous_candidate(const DataMatrix& x, const std::string& j,
                                                    const std::vector<std::string>& active,
                                                    const OrderingOptions& opt = {}) {
  if (active.size() < 2) throw InvalidArgument("exogenous scoring needs at least 2 active variables");
  if (std::find(active.begin(), active.end(), j) == active.end())
    throw InvalidArgument("candidate '" + j + "' is not active");
  const std::size_t jj = x.index_of(j);
  if (detail::row_degenerate(x.row(jj), x.means()(static_cast<Eigen::Index>(jj))))
    throw DegenerateInput("candidate '" + j + "' has zero variance", j);
  std::vector<std::size_t> idx;
  for (const auto& a : active) idx.push_back(x.index_of(a));
  return detail::score_exogenous(x, x.values(), jj, detail::by_id(x, idx), opt, 0);
}

// Fisher-combined HSIC score for x_j being a sink among `present`.
inline IndependenceReport score_sink_candidate(const DataMatrix& x, const std::string& j,
                                               const std::vector<std::string>& candidates,
                                               const std::vector<std::string>& present,
                                               const OrderingOptions& opt = {}) {
  if (present.size() < 3) throw InvalidArgument("sink scoring needs at least 3 present variables");
  if (std::find(candidates.begin(), candidates.end(), j) == candidates.end())
    throw InvalidArgument("'" + j + "' is not a candidate");
  for (const auto& c : candidates)
    if (std::find(present.begin(), present.end(), c) == present.end())
      throw InvalidArgument("candidate '" + c + "' is not present");
  std::vector<std::size_t> idx;
  for (const auto& a : present) idx.push_back(x.index_of(a));
  const Eigen::MatrixXd cov = detail::covariance_of(x.values());
  return detail::score_sink(x, cov, x.index_of(j), detail::by_id(x, idx), opt, 0);
}

// Finds exogenous variables one at a time, regressing each out of the rest,
// until the best candidate's combined p drops below alpha/(p-1) or only one
// variable is left.
inline TopDownResult top_down_phase(const DataMatrix& x, const OrderingOptions& opt = {}) {
  return detail::top_down(x, opt, false);
}

// Finds sink variables one at a time among the variables not in `k_head`,
// regressing on every variable still present (head variables included).
inline BottomUpResult bottom_up_phase(const DataMatrix& x, const std::vector<std::string>& k_head,
                                      const OrderingOptions& opt = {}) {
  detail::require_algorithm_input(x);
  const std::size_t p = x.variables();
  const double threshold = bonferroni_threshold(opt.alpha, p);
  BottomUpResult out;
  if (k_head.size() + 2 >= p) {
    out.trace.push_back({Phase::bottom_up, 0, {}, "", 1.0, threshold, StepOutcome::skipped});
    return out;
  }
  std::vector<std::size_t> present(p);
  std::iota(present.begin(), present.end(), std::size_t{0});
  present = detail::by_id(x, present);
  std::vector<std::size_t> candidates;
  for (auto i : present)
    if (std::find(k_head.begin(), k_head.end(), x.id(i)) == k_head.end()) candidates.push_back(i);
  if (candidates.size() + k_head.size() != p) throw InvalidArgument("k_head names unknown variables");

  const Eigen::MatrixXd cov = detail::covariance_of(x.values());
  detail::GramCache cache;
  for (std::size_t iteration = 0;; ++iteration) {
    if (candidates.size() < 3) {
      out.trace.push_back({Phase::bottom_up, iteration, {}, "", 1.0, threshold, StepOutcome::too_few_candidates});
      break;
    }
    std::vector<IndependenceReport> reports;
    for (auto j : candidates) reports.push_back(detail::score_sink(x, cov, j, present, opt, iteration, &cache));
    const std::size_t best = detail::argmax_report(reports);
    const std::size_t m = candidates[best];
    TraceEntry entry{Phase::bottom_up, iteration, detail::scores_of(reports), x.id(m),
                     reports[best].combined_p, threshold, StepOutcome::appended};
    if (reports[best].combined_p < threshold) {
      entry.outcome = StepOutcome::threshold_hit;
      out.trace.push_back(std::move(entry));
      break;
    }
    out.trace.push_back(std::move(entry));
    out.k_tail.insert(out.k_tail.begin(), x.id(m));
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
    present.erase(std::find(present.begin(), present.end(), m));
  }
  return out;
}

// Least-squares strengths of each ordered variable on everything that
// precedes it in the partial order, on the original (centered) data.
inline StrengthMap estimate_strengths(const DataMatrix& x, const OrderingResult& order,
                                      double condition_cap = kDefaultConditionCap) {
  const Eigen::MatrixXd cov = detail::covariance_of(x.values());
  StrengthMap out;
  auto fit = [&](const std::string& child, const std::vector<std::string>& parents) {
    if (parents.empty()) return;
    std::vector<std::size_t> idx;
    for (const auto& s : parents) idx.push_back(x.index_of(s));
    Eigen::VectorXd beta;
    try {
      beta = detail::regression_coefficients(cov, x.index_of(child), idx, condition_cap);
    } catch (const SingularMatrix& e) {
      throw SingularMatrix("strength estimation for '" + child + "': " + e.what(), e.condition);
    }
    for (std::size_t a = 0; a < parents.size(); ++a) out[{child, parents[a]}] = beta(static_cast<Eigen::Index>(a));
  };
  std::vector<std::string> before;
  for (const auto& h : order.k_head) {
    fit(h, before);
    before.push_back(h);
  }
  before.insert(before.end(), order.middle.begin(), order.middle.end());
  for (const auto& t : order.k_tail) {
    fit(t, before);
    before.push_back(t);
  }
  return out;
}

namespace detail {

inline OrderingResult finish_discover(const DataMatrix& x, TopDownResult head, const OrderingOptions& opt) {
  OrderingResult out;
  out.k_head = std::move(head.k_head);
  out.trace = std::move(head.trace);
  auto tail = with_phase("bottom-up phase", [&] { return bottom_up_phase(x, out.k_head, opt); });
  out.k_tail = std::move(tail.k_tail);
  out.trace.insert(out.trace.end(), tail.trace.begin(), tail.trace.end());
  for (const auto& id : x.ids())
    if (std::find(out.k_head.begin(), out.k_head.end(), id) == out.k_head.end() &&
        std::find(out.k_tail.begin(), out.k_tail.end(), id) == out.k_tail.end())
      out.middle.push_back(id);
  out.strengths = with_phase("strength estimation", [&] { return estimate_strengths(x, out, opt.condition_cap); });
  return out;
}

inline OrderingResult finish_baseline(const DataMatrix& x, TopDownResult head, const OrderingOptions& opt) {
  OrderingResult out;
  out.k_head = std::move(head.k_head);
  out.trace = std::move(head.trace);
  out.strengths = with_phase("strength estimation", [&] { return estimate_strengths(x, out, opt.condition_cap); });
  return out;
}

// Cuts an unstopped top-down run where the stopping rule would have ended it.
inline TopDownResult truncate_top_down(const TopDownResult& full, double threshold) {
  TopDownResult out;
  for (const auto& e : full.trace) {
    out.trace.push_back(e);
    if (e.selected_p < threshold) {
      out.trace.back().outcome = StepOutcome::threshold_hit;
      break;
    }
    out.k_head.push_back(e.selected);
    if (e.outcome == StepOutcome::exhausted) out.k_head = full.k_head;
  }
  return out;  // residuals left empty
}

}  // namespace detail

inline OrderingResult discover(const DataMatrix& x, const OrderingOptions& opt = {}) {
  detail::require_algorithm_input(x);
  auto head = detail::with_phase("top-down phase", [&] { return top_down_phase(x, opt); });
  return detail::finish_discover(x, std::move(head), opt);
}

// The same top-down search with no stopping rule: always a full order.
inline OrderingResult direct_lingam_baseline(const DataMatrix& x, const OrderingOptions& opt = {}) {
  auto head = detail::with_phase("top-down phase", [&] { return detail::top_down(x, opt, true); });
  return detail::finish_baseline(x, std::move(head), opt);
}

struct MethodPair {
  OrderingResult discover;
  OrderingResult baseline;
};

// Both methods on one data set, sharing their common top-down prefix. Same
// results as calling discover and direct_lingam_baseline separately with the
// same options. Throws if either would; the unstopped search can fail past
// the point where discover stops, so callers wanting per-method errors
// should fall back to the separate calls.
inline MethodPair discover_and_baseline(const DataMatrix& x, const OrderingOptions& opt = {}) {
  TopDownResult full = detail::with_phase("top-down phase", [&] { return detail::top_down(x, opt, true); });
  MethodPair out;
  TopDownResult head = detail::truncate_top_down(full, bonferroni_threshold(opt.alpha, x.variables()));
  out.baseline = detail::finish_baseline(x, std::move(full), opt);
  out.discover = detail::finish_discover(x, std::move(head), opt);
  return out;
}

}  // namespace lvorder
