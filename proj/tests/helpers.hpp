#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lvorder/data_matrix.hpp"

namespace testing_support {

inline lvorder::RowMatrix random_matrix(Eigen::Index p, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  lvorder::RowMatrix m(p, n);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = z(rng);
  return m;
}

inline std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

// Intercept-free least squares via the normal equations, built from plain
// loops on the data rather than a covariance matrix.
inline Eigen::VectorXd normal_equations(const lvorder::RowMatrix& x, Eigen::Index target,
                                        const std::vector<Eigen::Index>& regressors) {
  const auto k = static_cast<Eigen::Index>(regressors.size());
  Eigen::MatrixXd g(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < x.cols(); ++t) s += x(regressors[a], t) * x(regressors[b], t);
      g(a, b) = s;
    }
    double s = 0.0;
    for (Eigen::Index t = 0; t < x.cols(); ++t) s += x(regressors[a], t) * x(target, t);
    rhs(a) = s;
  }
  return g.fullPivLu().solve(rhs);
}

inline Eigen::RowVectorXd oracle_residual(const lvorder::RowMatrix& x, Eigen::Index target,
                                          const std::vector<Eigen::Index>& regressors) {
  const Eigen::VectorXd beta = normal_equations(x, target, regressors);
  Eigen::RowVectorXd r = x.row(target);
  for (std::size_t a = 0; a < regressors.size(); ++a) r -= beta(static_cast<Eigen::Index>(a)) * x.row(regressors[a]);
  return r;
}

// Survival function of chi-square with 2k degrees of freedom, closed form.
inline double chi2_even_sf(double x, int k) {
  const double h = x / 2.0;
  double term = 1.0, sum = 1.0;
  for (int i = 1; i < k; ++i) {
    term *= h / i;
    sum += term;
  }
  return std::exp(-h) * sum;
}

inline double sample_moment(const Eigen::Ref<const Eigen::VectorXd>& v, int order) {
  const double m = v.mean();
  return (v.array() - m).pow(order).mean();
}

inline double skewness(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return sample_moment(v, 3) / std::pow(sample_moment(v, 2), 1.5);
}

inline double excess_kurtosis(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return sample_moment(v, 4) / std::pow(sample_moment(v, 2), 2) - 3.0;
}

// Largest gap between the empirical CDF of `p` and the uniform CDF.
inline double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - p[i]);
    d = std::max(d, p[i] - static_cast<double>(i) / n);
  }
  return d;
}

}  // namespace testing_support
