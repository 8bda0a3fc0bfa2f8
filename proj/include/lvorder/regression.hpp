#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lvorder/data_matrix.hpp"
#include "lvorder/error.hpp"

namespace lvorder {

inline constexpr double kDefaultConditionCap = 1e12;

// Sample covariance, 1/(n-1) normalization.
struct CovarianceBlocks {
  Eigen::MatrixXd full;
  std::vector<std::string> ids;
};

namespace detail {

// True when a centered row carries no variation at the precision of its
// original magnitude.
inline bool row_degenerate(const Eigen::Ref<const Eigen::RowVectorXd>& centered, double mean = 0.0) {
  if (centered.size() == 0) return true;
  const double amax = centered.cwiseAbs().maxCoeff();
  if (amax == 0.0) return true;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(centered.size()));
  return sd <= 1e-12 * std::abs(mean);
}

inline double condition_number(const Eigen::MatrixXd& sym) {
  if (sym.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

inline Eigen::MatrixXd covariance_of(const RowMatrix& centered) {
  const double denom = static_cast<double>(centered.cols()) - 1.0;
  return (centered * centered.transpose()) / denom;
}

// x_i - (cov(x_i,x_j)/var(x_j)) x_j for centered rows.
inline Eigen::RowVectorXd simple_residual(const Eigen::Ref<const Eigen::RowVectorXd>& xi,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xj,
                                          double xj_sq_norm) {
  return xi - (xi.dot(xj) / xj_sq_norm) * xj;
}

// Regress rows[target] on rows[regressors] (centered data) given their
// covariance matrix `cov`; returns the coefficient vector aligned with
// `regressors`.
inline Eigen::VectorXd regression_coefficients(const Eigen::MatrixXd& cov, std::size_t target,
                                               const std::vector<std::size_t>& regressors,
                                               double condition_cap) {
  const auto k = static_cast<Eigen::Index>(regressors.size());
  Eigen::MatrixXd sigma(k, k);
  Eigen::VectorXd cross(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto ra = static_cast<Eigen::Index>(regressors[static_cast<std::size_t>(a)]);
    cross(a) = cov(ra, static_cast<Eigen::Index>(target));
    for (Eigen::Index b = 0; b < k; ++b)
      sigma(a, b) = cov(ra, static_cast<Eigen::Index>(regressors[static_cast<std::size_t>(b)]));
  }
  const double cond = condition_number(sigma);
  if (!(cond <= condition_cap))
    throw SingularMatrix("regressor covariance is singular or ill-conditioned (condition " +
                             std::to_string(cond) + ")",
                         cond);
  return sigma.ldlt().solve(cross);
}

}  // namespace detail

inline CovarianceBlocks covariance(const DataMatrix& x) {
  if (x.samples() < 2) throw InvalidArgument("covariance needs at least 2 samples");
  for (std::size_t i = 0; i < x.variables(); ++i)
    if (detail::row_degenerate(x.row(i), x.means()(static_cast<Eigen::Index>(i))))
      throw DegenerateInput("variable '" + x.id(i) + "' has zero variance", x.id(i));
  Eigen::MatrixXd c = detail::covariance_of(x.values());
  // symmetric by construction, but GEMM rounding can differ across triangles
  c = 0.5 * (c + c.transpose()).eval();
  return {std::move(c), x.ids()};
}

// Residuals of every other variable regressed on variable `j`; rows keep the
// original order with `j` removed.
inline DataMatrix simple_residuals(const DataMatrix& x, const std::string& j) {
  const std::size_t jj = x.index_of(j);
  const auto xj = x.row(jj);
  const double sq = xj.squaredNorm();
  if (detail::row_degenerate(xj, x.means()(static_cast<Eigen::Index>(jj))))
    throw DegenerateInput("regressor '" + j + "' has zero variance", j);
  RowMatrix out(static_cast<Eigen::Index>(x.variables() - 1), static_cast<Eigen::Index>(x.samples()));
  std::vector<std::string> ids;
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < x.variables(); ++i) {
    if (i == jj) continue;
    out.row(r++) = detail::simple_residual(x.row(i), xj, sq);
    ids.push_back(x.id(i));
  }
  return DataMatrix(std::move(out), std::move(ids));
}

// Residual of variable `j` regressed on all other variables.
inline Vector multiple_residual(const DataMatrix& x, const std::string& j,
                                double condition_cap = kDefaultConditionCap) {
  const std::size_t jj = x.index_of(j);
  if (x.variables() < 2) throw InvalidArgument("multiple_residual needs at least 2 variables");
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < x.variables(); ++i)
    if (i != jj) others.push_back(i);
  const Eigen::MatrixXd cov = detail::covariance_of(x.values());
  const Eigen::VectorXd beta = detail::regression_coefficients(cov, jj, others, condition_cap);
  Eigen::RowVectorXd r = x.row(jj);
  for (std::size_t a = 0; a < others.size(); ++a)
    r -= beta(static_cast<Eigen::Index>(a)) * x.row(others[a]);
  return r.transpose();
}

// Least-squares coefficients of `target` on `regressors`, keyed by regressor id.
inline std::map<std::string, double> ols_fit(const DataMatrix& x, const std::string& target,
                                             const std::vector<std::string>& regressors,
                                             double condition_cap = kDefaultConditionCap) {
  if (regressors.empty()) throw InvalidArgument("ols_fit needs at least one regressor");
  const std::size_t t = x.index_of(target);
  std::vector<std::size_t> idx;
  for (const auto& r : regressors) {
    const std::size_t i = x.index_of(r);
    if (i == t) throw InvalidArgument("ols_fit: target '" + target + "' listed as a regressor");
    if (detail::row_degenerate(x.row(i), x.means()(static_cast<Eigen::Index>(i))))
      throw DegenerateInput("regressor '" + r + "' has zero variance", r);
    idx.push_back(i);
  }
  const Eigen::MatrixXd cov = detail::covariance_of(x.values());
  const Eigen::VectorXd beta = detail::regression_coefficients(cov, t, idx, condition_cap);
  std::map<std::string, double> out;
  for (std::size_t a = 0; a < idx.size(); ++a) out[regressors[a]] = beta(static_cast<Eigen::Index>(a));
  return out;
}

}  // namespace lvorder
