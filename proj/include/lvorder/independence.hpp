#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "lvorder/data_matrix.hpp"
#include "lvorder/error.hpp"

namespace lvorder {

inline constexpr std::size_t kMinHsicSamples = 20;
inline constexpr double kPValueFloor = 1e-15;

struct HsicResult {
  double statistic = 0.0;  // n * HSIC_b
  double p_value = 1.0;
  double bandwidth_u = 0.0;
  double bandwidth_v = 0.0;
  bool degenerate = false;
};

struct HsicOptions {
  // Null distribution from this many seeded shuffles instead of the gamma
  // approximation.
  std::optional<std::size_t> permutation_shuffles;
  std::uint64_t seed = 0;
  // Subsample to this many samples (seeded) when n exceeds it.
  std::optional<std::size_t> subsample_cap;
};

struct FisherResult {
  double statistic = 0.0;
  double combined_p = 1.0;
};

struct IndependenceReport {
  std::string candidate;
  std::vector<std::pair<std::string, HsicResult>> per_test;
  double combined_statistic = 0.0;
  double combined_p = 1.0;
};

namespace detail {

// k-th smallest (1-based) of s[j]-s[i], i<j, for sorted s. Bisects over the
// bit patterns of non-negative doubles (monotone in value) and counts with two
// pointers, so the result is an exact order statistic in O(64 n).
inline double kth_pairwise_difference(const std::vector<double>& s, std::uint64_t k) {
  const std::size_t n = s.size();
  auto count_le = [&](double t) {
    std::uint64_t c = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (j < i + 1) j = i + 1;
      while (j < n && s[j] - s[i] <= t) ++j;
      c += j - i - 1;
    }
    return c;
  };
  if (count_le(0.0) >= k) return 0.0;
  std::uint64_t lo = std::bit_cast<std::uint64_t>(0.0);
  std::uint64_t hi = std::bit_cast<std::uint64_t>(s.back() - s.front());
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (count_le(std::bit_cast<double>(mid)) >= k)
      hi = mid;
    else
      lo = mid;
  }
  return std::bit_cast<double>(hi);
}

inline bool nearly_constant(std::span<const double> v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double scale = std::max(std::abs(*mn), std::abs(*mx));
  return (*mx - *mn) <= 1e-12 * scale || *mx == *mn;
}

}  // namespace detail

// Median of the positive pairwise distances |v_i - v_j|; 0 when none exist.
inline double median_pairwise_distance(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::uint64_t n = s.size();
  const std::uint64_t total = n * (n - 1) / 2;
  std::uint64_t zero_pairs = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const std::uint64_t run = j - i;
    zero_pairs += run * (run - 1) / 2;
    i = j;
  }
  const std::uint64_t m = total - zero_pairs;
  if (m == 0) return 0.0;
  if (m % 2 == 1) return detail::kth_pairwise_difference(s, zero_pairs + (m + 1) / 2);
  return 0.5 * (detail::kth_pairwise_difference(s, zero_pairs + m / 2) +
                detail::kth_pairwise_difference(s, zero_pairs + m / 2 + 1));
}

// Doubly centered Gaussian-kernel Gram matrix of a univariate sample, with the
// raw kernel's off-diagonal mean kept for the null moments. Only the upper
// triangle is stored, row by row. Storage and input copy are Eigen-allocated
// so that vectorized loops peel the same elements on every call; a malloc'd
// buffer shifts the scalar/packet split and the last bits of the result.
class CenteredGram {
 public:
  using Segment = Eigen::Map<const Eigen::ArrayXd>;

  explicit CenteredGram(std::span<const double> v) : n_(v.size()) {
    if (n_ < 2) throw InvalidArgument("Gram matrix needs at least 2 samples");
    if (detail::nearly_constant(v)) {
      degenerate_ = true;
      return;
    }
    bandwidth_ = median_pairwise_distance(v);
    const double gamma = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    const auto n = static_cast<Eigen::Index>(n_);
    const Eigen::ArrayXd x = Eigen::Map<const Eigen::ArrayXd>(v.data(), n);
    upper_.resize(static_cast<Eigen::Index>(n_ * (n_ + 1) / 2));
    Eigen::ArrayXd rs = Eigen::ArrayXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index m = n - i;
      Eigen::Map<Eigen::ArrayXd> seg(upper_.data() + offset(i), m);
      seg = (-(x.tail(m) - x(i)).square() * gamma).exp();
      rs(i) += seg.sum();
      rs.tail(m - 1) += seg.tail(m - 1);
    }
    const double nn = static_cast<double>(n_);
    const Eigen::ArrayXd r = rs / nn;
    const double g = r.mean();
    offdiag_mean_ = (rs.sum() - nn) / (nn * (nn - 1.0));
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index m = n - i;
      Eigen::Map<Eigen::ArrayXd>(upper_.data() + offset(i), m) -= r.tail(m) + (r(i) - g);
    }
  }

  std::size_t samples() const { return n_; }
  bool degenerate() const { return degenerate_; }
  double bandwidth() const { return bandwidth_; }
  double offdiag_mean() const { return offdiag_mean_; }

  // entries (i, i..n-1)
  Segment upper_row(Eigen::Index i) const {
    return Segment(upper_.data() + offset(i), static_cast<Eigen::Index>(n_) - i);
  }

  RowMatrix dense() const {
    const auto n = static_cast<Eigen::Index>(n_);
    RowMatrix out = RowMatrix::Zero(n, n);
    if (degenerate_) return out;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = upper_row(i);
      out.row(i).tail(n - i) = row.matrix().transpose();
      out.col(i).tail(n - i) = row.matrix();
    }
    return out;
  }

 private:
  std::size_t offset(Eigen::Index i) const {
    const auto k = static_cast<std::size_t>(i);
    return k * n_ - (k * (k - 1)) / 2;
  }

  std::size_t n_ = 0;
  bool degenerate_ = false;
  double bandwidth_ = 0.0;
  double offdiag_mean_ = 0.0;
  Eigen::ArrayXd upper_;
};

namespace detail {

inline HsicResult degenerate_result(const CenteredGram& a, const CenteredGram& b) {
  HsicResult r;
  r.bandwidth_u = a.bandwidth();
  r.bandwidth_v = b.bandwidth();
  r.degenerate = true;
  return r;
}

}  // namespace detail

// HSIC with a gamma distribution matched to the first two null moments.
inline HsicResult hsic_gamma(const CenteredGram& a, const CenteredGram& b) {
  if (a.samples() != b.samples()) throw InvalidArgument("HSIC inputs differ in length");
  if (a.samples() < kMinHsicSamples)
    throw InvalidArgument("HSIC needs at least " + std::to_string(kMinHsicSamples) + " samples");
  if (a.degenerate() || b.degenerate()) return detail::degenerate_result(a, b);

  const auto n = static_cast<double>(a.samples());
  // both matrices are symmetric: diagonal plus twice the strict upper triangle
  double s1 = 0.0, s2 = 0.0, d1 = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(a.samples()); ++i) {
    const auto ka = a.upper_row(i);
    const auto lb = b.upper_row(i);
    const Eigen::Index m = ka.size() - 1;
    const auto prod = ka.tail(m) * lb.tail(m);
    s1 += prod.sum();
    s2 += prod.square().sum();
    d1 += ka(0) * lb(0);
  }
  s1 = 2.0 * s1 + d1;
  s2 *= 2.0;
  HsicResult r;
  r.bandwidth_u = a.bandwidth();
  r.bandwidth_v = b.bandwidth();
  r.statistic = std::max(0.0, s1 / n);

  double var = s2 / 36.0 / (n * (n - 1.0));
  var *= 72.0 * (n - 4.0) * (n - 5.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
  const double mu_x = a.offdiag_mean();
  const double mu_y = b.offdiag_mean();
  const double mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n;
  if (!(var > 0.0) || !(mean > 0.0)) {
    r.degenerate = true;
    return r;
  }
  const double shape = mean * mean / var;
  const double scale = var * n / mean;
  r.p_value = r.statistic > 0.0 ? boost::math::gamma_q(shape, r.statistic / scale) : 1.0;
  return r;
}

// HSIC with a permutation null: p = (1 + #{T_perm >= T}) / (1 + shuffles).
inline HsicResult hsic_permutation(const CenteredGram& a, const CenteredGram& b, std::size_t shuffles,
                                   std::uint64_t seed) {
  if (a.samples() != b.samples()) throw InvalidArgument("HSIC inputs differ in length");
  if (a.samples() < kMinHsicSamples)
    throw InvalidArgument("HSIC needs at least " + std::to_string(kMinHsicSamples) + " samples");
  if (shuffles == 0) throw InvalidArgument("permutation null needs at least one shuffle");
  if (a.degenerate() || b.degenerate()) return detail::degenerate_result(a, b);

  const RowMatrix kc = a.dense();
  const RowMatrix lc = b.dense();
  const auto n = static_cast<Eigen::Index>(a.samples());
  HsicResult r;
  r.bandwidth_u = a.bandwidth();
  r.bandwidth_v = b.bandwidth();
  r.statistic = std::max(0.0, (kc.array() * lc.array()).sum() / static_cast<double>(n));

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::size_t exceed = 0;
  // relative slack so that exact ties (e.g. the identity permutation) count
  const double tol = 1e-12 * std::max(1.0, r.statistic);
  for (std::size_t s = 0; s < shuffles; ++s) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto lrow = lc.row(perm[static_cast<std::size_t>(i)]);
      const auto krow = kc.row(i);
      double row = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) row += krow(j) * lrow(perm[static_cast<std::size_t>(j)]);
      acc += row;
    }
    if (acc / static_cast<double>(n) >= r.statistic - tol) ++exceed;
  }
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + shuffles);
  return r;
}

inline HsicResult hsic_with(const CenteredGram& a, const CenteredGram& b, const HsicOptions& opt) {
  if (opt.permutation_shuffles) return hsic_permutation(a, b, *opt.permutation_shuffles, opt.seed);
  return hsic_gamma(a, b);
}

namespace detail {

inline std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<double> gather(std::span<const double> v, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace detail

inline HsicResult hsic_test(std::span<const double> u, std::span<const double> v, const HsicOptions& opt = {}) {
  if (u.size() != v.size()) throw InvalidArgument("HSIC inputs differ in length");
  if (u.size() < kMinHsicSamples)
    throw InvalidArgument("HSIC needs at least " + std::to_string(kMinHsicSamples) + " samples");
  if (opt.subsample_cap && u.size() > *opt.subsample_cap) {
    const auto idx = detail::subsample_indices(u.size(), *opt.subsample_cap, opt.seed);
    const auto us = detail::gather(u, idx);
    const auto vs = detail::gather(v, idx);
    return hsic_with(CenteredGram(us), CenteredGram(vs), opt);
  }
  return hsic_with(CenteredGram(u), CenteredGram(v), opt);
}

inline HsicResult hsic_test(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const HsicOptions& opt = {}) {
  return hsic_test(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                   std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), opt);
}

// Fisher's method: -2 sum log p_i against chi-square with 2k degrees of freedom.
inline FisherResult fisher_combine(std::span<const double> p_values) {
  if (p_values.empty()) throw InvalidArgument("fisher_combine needs at least one p-value");
  double stat = 0.0;
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p-value outside [0,1]: " + std::to_string(p));
    stat -= 2.0 * std::log(std::max(p, kPValueFloor));
  }
  stat = std::max(stat, 0.0);
  const double k = static_cast<double>(p_values.size());
  return {stat, boost::math::gamma_q(k, stat / 2.0)};
}

inline FisherResult fisher_combine(std::initializer_list<double> p_values) {
  return fisher_combine(std::span<const double>(p_values.begin(), p_values.size()));
}

inline double bonferroni_threshold(double alpha, std::size_t p) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
  if (p < 2) throw InvalidArgument("Bonferroni threshold needs at least 2 variables");
  return alpha / static_cast<double>(p - 1);
}

inline IndependenceReport combine_report(std::string candidate,
                                         std::vector<std::pair<std::string, HsicResult>> tests) {
  std::vector<double> ps;
  ps.reserve(tests.size());
  for (const auto& t : tests) ps.push_back(t.second.p_value);
  const FisherResult f = fisher_combine(ps);
  return {std::move(candidate), std::move(tests), f.statistic, f.combined_p};
}

}  // namespace lvorder
