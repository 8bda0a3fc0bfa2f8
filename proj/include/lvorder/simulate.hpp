#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lvorder/data_matrix.hpp"
#include "lvorder/error.hpp"
#include "lvorder/seeding.hpp"

namespace lvorder {

enum class NoiseKind { gauss_mixture_asymmetric, gauss_mixture_symmetric, double_exponential };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::gauss_mixture_asymmetric: return "gauss_mixture_asymmetric";
    case NoiseKind::gauss_mixture_symmetric: return "gauss_mixture_symmetric";
    case NoiseKind::double_exponential: return "double_exponential";
  }
  return "unknown";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "gauss_mixture_asymmetric") return NoiseKind::gauss_mixture_asymmetric;
  if (s == "gauss_mixture_symmetric") return NoiseKind::gauss_mixture_symmetric;
  if (s == "double_exponential") return NoiseKind::double_exponential;
  throw InvalidArgument("unknown noise kind '" + s + "'");
}

// Zero-mean noise scaled to target_sd. Mixture parameters describe the raw
// mixture; draws are standardized with its analytic mean and sd.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::double_exponential;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sds;
  double target_sd = 1.0;

  static NoiseSpec asymmetric_mixture(double target_sd = 1.0) {
    return {NoiseKind::gauss_mixture_asymmetric, {0.7, 0.3}, {-1.0, 2.33}, {0.5, 0.5}, target_sd};
  }
  static NoiseSpec symmetric_mixture(double target_sd = 1.0) {
    return {NoiseKind::gauss_mixture_symmetric, {0.5, 0.5}, {-1.5, 1.5}, {0.5, 0.5}, target_sd};
  }
  static NoiseSpec laplace(double target_sd = 1.0) { return {NoiseKind::double_exponential, {}, {}, {}, target_sd}; }
  static NoiseSpec defaults(NoiseKind kind, double target_sd = 1.0) {
    switch (kind) {
      case NoiseKind::gauss_mixture_asymmetric: return asymmetric_mixture(target_sd);
      case NoiseKind::gauss_mixture_symmetric: return symmetric_mixture(target_sd);
      case NoiseKind::double_exponential: break;
    }
    return laplace(target_sd);
  }

  bool is_mixture() const { return kind != NoiseKind::double_exponential; }

  double raw_mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * means[k];
    return m;
  }

  double raw_sd() const {
    const double m = raw_mean();
    double v = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) v += weights[k] * (sds[k] * sds[k] + (means[k] - m) * (means[k] - m));
    return std::sqrt(v);
  }

  void validate() const {
    if (!(target_sd > 0.0) || !std::isfinite(target_sd)) throw InvalidArgument("noise target_sd must be positive");
    if (!is_mixture()) return;
    if (weights.empty() || weights.size() != means.size() || weights.size() != sds.size())
      throw InvalidArgument("mixture weights, means and sds must be non-empty and of equal length");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw InvalidArgument("mixture weights must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture weights must sum to 1");
    for (double s : sds)
      if (!(s > 0.0)) throw InvalidArgument("mixture component sds must be positive");
    bool distinct = false;
    for (std::size_t k = 0; k < weights.size(); ++k)
      for (std::size_t l = 0; l < weights.size(); ++l)
        if (weights[k] > 0.0 && weights[l] > 0.0 && (means[k] != means[l] || sds[k] != sds[l])) distinct = true;
    if (!distinct) throw InvalidArgument("mixture reduces to a single Gaussian");
  }
};

inline Eigen::VectorXd sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample_noise needs n >= 1");
  spec.validate();
  std::mt19937_64 rng(seed);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  if (!spec.is_mixture()) {
    // Laplace with scale b has sd b*sqrt(2)
    const double b = spec.target_sd / std::sqrt(2.0);
    std::exponential_distribution<double> expo(1.0);
    for (auto& v : out) v = b * (expo(rng) - expo(rng));
    return out;
  }
  const double m = spec.raw_mean();
  const double s = spec.raw_sd();
  std::discrete_distribution<std::size_t> pick(spec.weights.begin(), spec.weights.end());
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto& v : out) {
    const std::size_t k = pick(rng);
    const double raw = spec.means[k] + spec.sds[k] * z(rng);
    v = (raw - m) / s * spec.target_sd;
  }
  return out;
}

// x = B x + Lambda f + e. B(i, j) is the strength of j -> i.
struct ModelSpec {
  Eigen::MatrixXd B;       // p x p
  Eigen::MatrixXd Lambda;  // p x q
  std::vector<NoiseSpec> noise;
  std::vector<NoiseSpec> confounder_noise;
  std::vector<std::size_t> causal_order;  // row indices, earliest first
  std::vector<std::string> names;         // defaults to x1..xp

  std::size_t variables() const { return static_cast<std::size_t>(B.rows()); }
  std::size_t confounders() const { return static_cast<std::size_t>(Lambda.cols()); }

  std::vector<std::string> ids() const {
    return names.empty() ? DataMatrix::default_ids(B.rows()) : names;
  }

  void validate() const {
    const auto p = B.rows();
    if (p < 1 || B.cols() != p) throw InvalidArgument("B must be a non-empty square matrix");
    if (Lambda.rows() != p && !(Lambda.size() == 0)) throw InvalidArgument("Lambda must have p rows");
    if (noise.size() != static_cast<std::size_t>(p)) throw InvalidArgument("need one noise spec per variable");
    if (confounder_noise.size() != confounders()) throw InvalidArgument("need one noise spec per confounder");
    if (!names.empty() && names.size() != static_cast<std::size_t>(p)) throw InvalidArgument("need one name per variable");
    for (const auto& s : noise) s.validate();
    for (const auto& s : confounder_noise) s.validate();
    if (causal_order.size() != static_cast<std::size_t>(p)) throw InvalidArgument("causal_order must list every variable");
    std::vector<int> pos(static_cast<std::size_t>(p), -1);
    for (std::size_t k = 0; k < causal_order.size(); ++k) {
      const auto v = causal_order[k];
      if (v >= static_cast<std::size_t>(p) || pos[v] != -1) throw InvalidArgument("causal_order is not a permutation");
      pos[v] = static_cast<int>(k);
    }
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        if (B(i, j) != 0.0 && pos[static_cast<std::size_t>(j)] >= pos[static_cast<std::size_t>(i)])
          throw InvalidArgument("B is not strictly lower triangular under causal_order (edge " + std::to_string(j) +
                                " -> " + std::to_string(i) + ")");
    for (Eigen::Index c = 0; c < Lambda.cols(); ++c)
      if ((Lambda.col(c).array() != 0.0).count() < 2)
        throw InvalidArgument("confounder " + std::to_string(c) + " loads on fewer than two variables");
  }
};

// True structure carried alongside generated data.
struct GroundTruth {
  std::vector<std::string> ids;
  Eigen::MatrixXd B_true;
  Eigen::MatrixXd Lambda;
  // ancestor(i, j): directed path i -> ... -> j.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ancestor;
  // Some confounder reaches both i and j, directly or through descendants of
  // a variable it loads on.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> shares_confounder;

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return i;
    throw InvalidArgument("unknown variable id '" + id + "'");
  }
};

inline GroundTruth ground_truth(const ModelSpec& spec) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.variables());
  GroundTruth t;
  t.ids = spec.ids();
  t.B_true = spec.B;
  t.Lambda = spec.Lambda.size() == 0 ? Eigen::MatrixXd(p, 0) : spec.Lambda;
  t.ancestor.setConstant(p, p, false);
  // closure in causal order: ancestors of i = parents of i and their ancestors
  for (auto i : spec.causal_order) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (spec.B(ii, j) == 0.0) continue;
      t.ancestor(j, ii) = true;
      for (Eigen::Index a = 0; a < p; ++a)
        if (t.ancestor(a, j)) t.ancestor(a, ii) = true;
    }
  }
  t.shares_confounder.setConstant(p, p, false);
  for (Eigen::Index c = 0; c < t.Lambda.cols(); ++c) {
    std::vector<bool> reached(static_cast<std::size_t>(p), false);
    for (Eigen::Index i = 0; i < p; ++i) {
      if (t.Lambda(i, c) == 0.0) continue;
      reached[static_cast<std::size_t>(i)] = true;
      for (Eigen::Index d = 0; d < p; ++d)
        if (t.ancestor(i, d)) reached[static_cast<std::size_t>(d)] = true;
    }
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        if (i != j && reached[static_cast<std::size_t>(i)] && reached[static_cast<std::size_t>(j)])
          t.shares_confounder(i, j) = true;
  }
  return t;
}

struct GeneratedData {
  DataMatrix data;      // centered
  RowMatrix raw;        // as generated, p x n
  RowMatrix noise;      // e, p x n
  RowMatrix confounders;  // f, q x n
  GroundTruth truth;
};

inline GeneratedData generate(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  GroundTruth truth = ground_truth(spec);
  const auto p = static_cast<Eigen::Index>(spec.variables());
  const auto q = static_cast<Eigen::Index>(spec.confounders());
  const auto nn = static_cast<Eigen::Index>(n);
  GeneratedData out;
  out.noise.resize(p, nn);
  out.confounders.resize(q, nn);
  for (Eigen::Index i = 0; i < p; ++i)
    out.noise.row(i) = sample_noise(spec.noise[static_cast<std::size_t>(i)], n,
                                    derive_seed(seed, {tag_of("e"), static_cast<std::uint64_t>(i)}))
                           .transpose();
  for (Eigen::Index c = 0; c < q; ++c)
    out.confounders.row(c) = sample_noise(spec.confounder_noise[static_cast<std::size_t>(c)], n,
                                          derive_seed(seed, {tag_of("f"), static_cast<std::uint64_t>(c)}))
                                 .transpose();
  out.raw.setZero(p, nn);
  for (auto i : spec.causal_order) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::RowVectorXd x = out.noise.row(ii);
    for (Eigen::Index j = 0; j < p; ++j)
      if (spec.B(ii, j) != 0.0) x += spec.B(ii, j) * out.raw.row(j);
    for (Eigen::Index c = 0; c < q; ++c)
      if (truth.Lambda(ii, c) != 0.0) x += truth.Lambda(ii, c) * out.confounders.row(c);
    out.raw.row(ii) = x;
  }
  out.data = DataMatrix(out.raw, truth.ids);
  out.truth = std::move(truth);
  return out;
}

namespace detail {

// Each x_i as coefficients over the independent sources [e_1..e_p, f_1..f_q].
inline Eigen::MatrixXd source_loadings(const ModelSpec& spec) {
  const auto p = static_cast<Eigen::Index>(spec.variables());
  const auto q = static_cast<Eigen::Index>(spec.confounders());
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(p, p + q);
  for (auto i : spec.causal_order) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < p; ++j)
      if (spec.B(ii, j) != 0.0) coef.row(ii) += spec.B(ii, j) * coef.row(j);
    for (Eigen::Index c = 0; c < q; ++c) coef(ii, p + c) += spec.Lambda(ii, c);
    coef(ii, ii) += 1.0;
  }
  return coef;
}

inline Eigen::VectorXd source_variances(const ModelSpec& spec) {
  const auto p = static_cast<Eigen::Index>(spec.variables());
  const auto q = static_cast<Eigen::Index>(spec.confounders());
  Eigen::VectorXd v(p + q);
  for (Eigen::Index i = 0; i < p; ++i) v(i) = std::pow(spec.noise[static_cast<std::size_t>(i)].target_sd, 2);
  for (Eigen::Index c = 0; c < q; ++c) v(p + c) = std::pow(spec.confounder_noise[static_cast<std::size_t>(c)].target_sd, 2);
  return v;
}

}  // namespace detail

// (I-B)^{-1} (Lambda D_f Lambda^T + D_e) (I-B)^{-T}
inline Eigen::MatrixXd analytic_covariance(const ModelSpec& spec) {
  spec.validate();
  const Eigen::MatrixXd coef = detail::source_loadings(spec);
  return coef * detail::source_variances(spec).asDiagonal() * coef.transpose();
}

// Rescales each e_i, in causal order, so var(x_i)/var(e_i) - 1 = ratio for
// every variable with a parent or a confounder. Variables with neither keep
// their sd.
inline ModelSpec calibrate_snr(ModelSpec spec, double ratio = 1.0) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.variables());
  const auto q = static_cast<Eigen::Index>(spec.confounders());
  Eigen::VectorXd var = detail::source_variances(spec);
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(p, p + q);
  for (auto i : spec.causal_order) {
    const auto ii = static_cast<Eigen::Index>(i);
    bool has_input = false;
    Eigen::RowVectorXd signal = Eigen::RowVectorXd::Zero(p + q);
    for (Eigen::Index j = 0; j < p; ++j)
      if (spec.B(ii, j) != 0.0) {
        signal += spec.B(ii, j) * coef.row(j);
        has_input = true;
      }
    for (Eigen::Index c = 0; c < q; ++c)
      if (spec.Lambda(ii, c) != 0.0) {
        signal(p + c) += spec.Lambda(ii, c);
        has_input = true;
      }
    if (has_input) {
      if (!(ratio > 0.0))
        throw InvalidArgument("signal-to-noise ratio must be positive for variable with inputs ('" + spec.ids()[i] + "')");
      const double signal_var = (signal.array().square() * var.transpose().array()).sum();
      if (!(signal_var > 0.0))
        throw InvalidArgument("variable '" + spec.ids()[i] + "' has zero incoming signal variance");
      const double sd = std::sqrt(signal_var / ratio);
      spec.noise[i].target_sd = sd;
      var(ii) = sd * sd;
    }
    signal(ii) += 1.0;
    coef.row(ii) = signal;
  }
  return spec;
}

// Six observed variables, two latent confounders. Edges:
//   x1 -> x2, x1 -> x4, x2 -> x3, x4 -> x5, x3 -> x6, x5 -> x6
//   f1 -> {x2, x3}, f2 -> {x4, x5}
// Each confounder loads on a parent-child pair. Only x1 is reached by no
// confounder; x6 has none of its own.
// Noise: e1, e4, f1 asymmetric mixture; e2, e5, f2 Laplace; e3, e6
// symmetric mixture. Calibrated to signal-to-noise ratio 1.
inline ModelSpec paper_benchmark_spec() {
  ModelSpec s;
  s.B = Eigen::MatrixXd::Zero(6, 6);
  s.B(1, 0) = 0.9;   // x1 -> x2
  s.B(3, 0) = -0.7;  // x1 -> x4
  s.B(2, 1) = 0.8;   // x2 -> x3
  s.B(4, 3) = 0.6;   // x4 -> x5
  s.B(5, 2) = -0.8;  // x3 -> x6
  s.B(5, 4) = 0.7;   // x5 -> x6
  s.Lambda = Eigen::MatrixXd::Zero(6, 2);
  s.Lambda(1, 0) = 1.5;
  s.Lambda(2, 0) = -1.5;
  s.Lambda(3, 1) = -0.8;
  s.Lambda(4, 1) = 1.0;
  s.noise = {NoiseSpec::asymmetric_mixture(), NoiseSpec::laplace(),           NoiseSpec::symmetric_mixture(),
             NoiseSpec::asymmetric_mixture(), NoiseSpec::laplace(),           NoiseSpec::symmetric_mixture()};
  s.confounder_noise = {NoiseSpec::asymmetric_mixture(), NoiseSpec::laplace()};
  s.causal_order = {0, 1, 3, 2, 4, 5};
  return calibrate_snr(std::move(s), 1.0);
}

// Confounder-free chain x1 -> x2 -> ... -> xp cycling through the three noise
// kinds, calibrated to ratio 1.
inline ModelSpec chain_spec(std::size_t p, double strength = 0.8) {
  if (p < 2) throw InvalidArgument("chain needs at least 2 variables");
  const auto pp = static_cast<Eigen::Index>(p);
  ModelSpec s;
  s.B = Eigen::MatrixXd::Zero(pp, pp);
  for (Eigen::Index i = 1; i < pp; ++i) s.B(i, i - 1) = (i % 2 == 1) ? strength : -strength;
  s.Lambda = Eigen::MatrixXd(pp, 0);
  const NoiseKind kinds[] = {NoiseKind::gauss_mixture_asymmetric, NoiseKind::double_exponential,
                             NoiseKind::gauss_mixture_symmetric};
  for (std::size_t i = 0; i < p; ++i) {
    s.noise.push_back(NoiseSpec::defaults(kinds[i % 3]));
    s.causal_order.push_back(i);
  }
  return calibrate_snr(std::move(s), 1.0);
}

// Four variables, no directed edges; f1 loads on every variable and f2 on
// x2..x4, so every pair shares a confounder.
inline ModelSpec fully_confounded_spec() {
  ModelSpec s;
  s.B = Eigen::MatrixXd::Zero(4, 4);
  s.Lambda.resize(4, 2);
  s.Lambda << 1.0, 0.0,
              0.9, 0.8,
             -0.8, 1.0,
              1.0, -0.9;
  s.noise = {NoiseSpec::asymmetric_mixture(), NoiseSpec::laplace(), NoiseSpec::symmetric_mixture(),
             NoiseSpec::asymmetric_mixture()};
  s.confounder_noise = {NoiseSpec::asymmetric_mixture(), NoiseSpec::laplace()};
  s.causal_order = {0, 1, 2, 3};
  return calibrate_snr(std::move(s), 1.0);
}

// "paper-benchmark", "chain4", "confounded4".
inline ModelSpec builtin_spec(const std::string& name) {
  if (name == "paper-benchmark") return paper_benchmark_spec();
  if (name == "chain4") return chain_spec(4);
  if (name == "confounded4") return fully_confounded_spec();
  throw InvalidArgument("unknown builtin spec '" + name + "'");
}

inline bool is_builtin_spec(const std::string& name) {
  return name == "paper-benchmark" || name == "chain4" || name == "confounded4";
}

}  // namespace lvorder
