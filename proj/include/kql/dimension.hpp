#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kql/features.hpp"

namespace kql {

// Gram-matrix dimension diagnostics:
//   d_eff(lambda, x_1:n) = tr((G + lambda I)^-1 G)
//   d_pse(lambda, x_1:n) = ln det(I + G/lambda)
// plus executable checkers for the identities and inequalities they satisfy.

struct DimQuery {
  Mat gram;
  double lambda;
};

namespace detail {

inline void validate_query(const DimQuery& q) {
  if (!(q.lambda > 0.0)) throw std::invalid_argument("dimension: lambda must be positive");
  const int n = static_cast<int>(q.gram.rows());
  if (q.gram.cols() != n) throw std::invalid_argument("dimension: gram must be square");
  if (n == 0) return;
  if ((q.gram - q.gram.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("dimension: gram must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(q.gram, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8 * n)
    throw std::invalid_argument("dimension: gram is not positive semidefinite");
}

inline Eigen::LLT<Mat> regularized_llt(const Mat& gram, double lambda) {
  Mat reg = gram;
  reg.diagonal().array() += lambda;
  Eigen::LLT<Mat> llt(reg);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("dimension: regularized gram failed to factor");
  return llt;
}

// prefix widths |K_{x_i}|^2 against (Sigma_{m} + lambda I)^-1 from the leading
// m x m principal block of the gram
inline double prefix_width_sq(const Mat& gram, double lambda, int m, int i) {
  if (m == 0) return gram(i, i) / lambda;
  Mat reg = gram.topLeftCorner(m, m);
  reg.diagonal().array() += lambda;
  Vec k = gram.block(0, i, m, 1);
  Vec sol = reg.llt().solve(k);
  return std::max(gram(i, i) - k.dot(sol), 0.0) / lambda;
}

}  // namespace detail

inline double effective_dimension(const DimQuery& q) {
  detail::validate_query(q);
  const int n = static_cast<int>(q.gram.rows());
  if (n == 0) return 0.0;
  auto llt = detail::regularized_llt(q.gram, q.lambda);
  return llt.solve(q.gram).trace();
}

inline double pseudo_dimension(const DimQuery& q) {
  detail::validate_query(q);
  const int n = static_cast<int>(q.gram.rows());
  if (n == 0) return 0.0;
  auto llt = detail::regularized_llt(q.gram, q.lambda);
  const Mat& L = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(L(i, i) * L(i, i) / q.lambda);
  return logdet;
}

// sum_i |K_{x_i}|^2_{(Sigma + lambda I)^-1}, evaluated through the gram; agrees
// with effective_dimension up to numerical error
inline double effective_dimension_dual_identity(const DimQuery& q) {
  detail::validate_query(q);
  const int n = static_cast<int>(q.gram.rows());
  if (n == 0) return 0.0;
  auto llt = detail::regularized_llt(q.gram, q.lambda);
  Mat sol = llt.solve(q.gram);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    total += (q.gram(i, i) - q.gram.col(i).dot(sol.col(i))) / q.lambda;
  return total;
}

struct CheckRecord {
  bool pass;
  std::string name;
  double lhs;
  double rhs;
};

// d_eff and d_pse are non-decreasing along prefixes; fails on the first
// violating prefix, otherwise reports the tightest adjacent margin
inline CheckRecord check_monotonicity(const Mat& gram, double lambda,
                                      double slack = 1e-10) {
  const int n = static_cast<int>(gram.rows());
  double prev_eff = 0.0, prev_pse = 0.0;
  CheckRecord worst{true, "monotonicity", 0.0, 0.0};
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= n; ++m) {
    DimQuery q{gram.topLeftCorner(m, m), lambda};
    const double eff = effective_dimension(q);
    const double pse = pseudo_dimension(q);
    const struct { const char* name; double prev, cur; } pairs[] = {
        {"deff_monotone", prev_eff, eff}, {"dpse_monotone", prev_pse, pse}};
    for (const auto& c : pairs) {
      if (c.cur < c.prev - slack)
        return {false, std::string(c.name) + "[prefix=" + std::to_string(m) + "]",
                c.prev, c.cur};
      if (c.cur - c.prev < worst_margin) {
        worst_margin = c.cur - c.prev;
        worst = {true, std::string(c.name) + "[prefix=" + std::to_string(m) + "]",
                 c.prev, c.cur};
      }
    }
    prev_eff = eff;
    prev_pse = pse;
  }
  return worst;
}

// sum_i sum_{tau<=i} gamma^{i-tau} |K_{x_i}|^2_{(Sigma_{tau-1}+lambda I)^-1}
//   <= (1/lambda) / (ln(1 + 1/lambda) (1-gamma)^2) * d_pse(lambda, x_1:n)
inline CheckRecord check_sum_of_ucb(const Mat& gram, double lambda, double gamma) {
  const int n = static_cast<int>(gram.rows());
  double lhs = 0.0;
  for (int i = 0; i < n; ++i) {
    double w_sum = 0.0;
    for (int tau = 0; tau <= i; ++tau) {
      const double w2 = detail::prefix_width_sq(gram, lambda, tau, i);
      w_sum += std::pow(gamma, i - tau) * w2;
    }
    lhs += w_sum;
  }
  const double dpse = pseudo_dimension({gram, lambda});
  const double rhs =
      (1.0 / lambda) / (std::log1p(1.0 / lambda) * (1.0 - gamma) * (1.0 - gamma)) * dpse;
  return {lhs <= rhs * (1.0 + 1e-12) + 1e-12, "sum_of_ucb", lhs, rhs};
}

// closed-form upper bounds on d_eff
inline double d_lambda_bound_linear(int d) {
  if (d < 1) throw std::invalid_argument("d_lambda_bound: dimension must be >= 1");
  return static_cast<double>(d);
}

inline double d_lambda_bound_gaussian(int d, double eta, double n, double lambda) {
  if (d < 1) throw std::invalid_argument("d_lambda_bound: dimension must be >= 1");
  if (lambda > n) throw std::domain_error("d_lambda_bound: requires lambda <= n");
  return 3.0 * std::pow(6.0 + 41.0 / d * eta + 3.0 / d * std::log(n / lambda),
                        static_cast<double>(d));
}

// log covering-number bounds for the two identity embeddings
inline double covering_log_linear_h(int d, double eps) {
  return d * std::log1p(2.0 / eps);
}
inline double covering_log_linear_hs(int d, double eps) {
  return static_cast<double>(d) * d * std::log1p(2.0 / eps);
}
inline double covering_log_gaussian_h(int d, double eta, double eps) {
  const double level = std::ceil(2.0 * (std::log(2.0 / eps) + std::exp(2.0) * eta));
  return std::pow(level, static_cast<double>(d)) * std::log1p(4.0 / eps);
}
inline double covering_log_gaussian_hs(int d, double eta, double eps) {
  const double level =
      std::ceil(2.0 * (std::log(2.0 * std::sqrt(2.0) / eps) + std::exp(2.0) * eta));
  return std::pow(level, 2.0 * d) * std::log1p(4.0 / eps);
}

struct KernelDescriptor {
  KernelKind kind;
  int dim;     // feature-space dimension the points live in
  double eta;  // rbf bandwidth, ignored for linear
};

// sum of the two covering log-bounds at the granularities the confidence-width
// analysis requires
inline double c_lambda_bound(const KernelDescriptor& k, double T, double lambda,
                             double gamma) {
  const double eps_h = lambda * lambda * (1.0 - gamma) / (4.0 * T * T);
  const double eps_hs =
      std::pow(lambda, 3) * (1.0 - gamma) / (32.0 * std::pow(T + lambda, 3));
  if (k.kind == KernelKind::kLinear)
    return covering_log_linear_h(k.dim, eps_h) + covering_log_linear_hs(k.dim, eps_hs);
  return covering_log_gaussian_h(k.dim, k.eta, eps_h) +
         covering_log_gaussian_hs(k.dim, k.eta, eps_hs);
}

struct TheoryParams {
  double T;
  double gamma;
  double lambda;
  double rho = 1.0;
  double epsilon = 0.0;
  double sigma = 0.0;
  double p = 0.05;
  double d_lambda = 1.0;
  double c_lambda = 0.0;
};

namespace detail {
inline void validate_theory(const TheoryParams& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("theory: lambda must be positive");
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw std::invalid_argument("theory: gamma must be in [0,1)");
  if (p.rho < 1.0 - p.gamma) throw std::invalid_argument("theory: rho must be >= 1 - gamma");
  if (p.epsilon < 0.0) throw std::invalid_argument("theory: epsilon must be nonnegative");
  if (!(p.sigma >= 0.0 && p.sigma <= 1.0)) throw std::invalid_argument("theory: sigma must be in [0,1]");
  if (!(p.p > 0.0)) throw std::invalid_argument("theory: p must be positive");
  if (p.d_lambda < 1.0) throw std::invalid_argument("theory: d_lambda must be >= 1");
  if (p.c_lambda < 0.0) throw std::invalid_argument("theory: c_lambda must be nonnegative");
  if (!(p.T > 0.0)) throw std::invalid_argument("theory: T must be positive");
}
}  // namespace detail

// beta = (1/(1-gamma)) min(2 sqrt(T+lambda),
//        3 rho sqrt(lambda) + epsilon sqrt(T d_lambda)
//        + 2 sigma sqrt(d_lambda ln(e(T+lambda)/lambda) + ln(2/p) + c_lambda))
inline double theoretical_beta(const TheoryParams& p) {
  detail::validate_theory(p);
  const double cap = 2.0 * std::sqrt(p.T + p.lambda);
  const double conf = 3.0 * p.rho * std::sqrt(p.lambda) +
                      p.epsilon * std::sqrt(p.T * p.d_lambda) +
                      2.0 * p.sigma *
                          std::sqrt(p.d_lambda * std::log(std::exp(1.0) * (p.T + p.lambda) / p.lambda) +
                                    std::log(2.0 / p.p) + p.c_lambda);
  return std::min(cap, conf) / (1.0 - p.gamma);
}

// the regret upper bound with its hidden constant set to 1; used for
// bound-vs-empirical curve comparisons only
inline double regret_bound(const TheoryParams& p) {
  detail::validate_theory(p);
  const double log_ratio = std::log(std::exp(1.0) * (p.T + p.lambda) / p.lambda);
  const double front = std::sqrt(p.T * p.d_lambda * log_ratio /
                                 (std::log1p(1.0 / p.lambda) * std::pow(1.0 - p.gamma, 5)));
  const double log_ratio_p = std::log(std::exp(1.0) * (p.T + p.lambda) / (p.lambda * p.p));
  const double tail = p.rho + p.epsilon * std::sqrt(p.d_lambda * p.T / p.lambda) +
                      p.sigma * std::sqrt((p.d_lambda * log_ratio_p + p.c_lambda) / p.lambda);
  return front * tail;
}

}  // namespace kql
