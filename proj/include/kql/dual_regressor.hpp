#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "kql/features.hpp"

namespace kql {

// Dual-form ridge machinery over a growing set of anchor points x_1..x_t.
// Maintains the Gram matrix G and a lower Cholesky factor L with
// L L^T = G + lambda I, extended one bordered row per push (no
// refactorization). Everything the UCB machinery needs reduces to solves
// against L:
//   width(z)^2      = (K(z,z) - k(z)^T (G+lambda I)^-1 k(z)) / lambda
//   ridge_predict   = y^T (G+lambda I)^-1 k(z)
//   rkhs_norm_sq    = alpha^T G alpha,  alpha = (G+lambda I)^-1 y
class DualRegressor {
 public:
  DualRegressor(Kernel kernel, double lambda, int capacity_hint = 16)
      : kernel_(kernel), lambda_(lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("regressor: lambda must be positive");
    const int cap = std::max(capacity_hint, 1);
    anchors_.resize(cap, kernel_.dim());
    gram_.resize(cap, cap);
    chol_.setZero(cap, cap);
  }

  int size() const { return t_; }
  double lambda() const { return lambda_; }
  const Kernel& kernel() const { return kernel_; }

  Vec kernel_column(const Vec& z) const { return kernel_.column(anchors_, t_, z); }

  // solves L w = col in place (forward substitution against the current factor)
  void forward_solve_in_place(Eigen::Ref<Mat> cols) const {
    if (t_ == 0) return;
    chol_.topLeftCorner(t_, t_).triangularView<Eigen::Lower>().solveInPlace(cols);
  }

  // solves L^T x = w in place, completing (G + lambda I)^-1 col
  void back_solve_in_place(Eigen::Ref<Mat> cols) const {
    if (t_ == 0) return;
    chol_.topLeftCorner(t_, t_).transpose().triangularView<Eigen::Upper>().solveInPlace(cols);
  }

  // alpha = (G + lambda I)^-1 y
  Vec solve(const Vec& y) const {
    if (y.size() != t_) throw std::invalid_argument("regressor: target length mismatch");
    Vec x = y;
    if (t_ == 0) return x;
    auto L = chol_.topLeftCorner(t_, t_);
    L.triangularView<Eigen::Lower>().solveInPlace(x);
    L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
  }

  double width_sq_from(double kzz, const Vec& column) const {
    Vec w = column;
    forward_solve_in_place(w);
    return std::max(kzz - w.squaredNorm(), 0.0) / lambda_;
  }

  double width_sq(const Vec& z) const {
    return width_sq_from(kernel_.self(z), kernel_column(z));
  }

  double width(const Vec& z) const { return std::sqrt(width_sq(z)); }

  double ridge_predict(const Vec& targets, const Vec& z) const {
    if (t_ == 0) {
      if (targets.size() != 0) throw std::invalid_argument("regressor: target length mismatch");
      return 0.0;
    }
    return solve(targets).dot(kernel_column(z));
  }

  // squared RKHS norm of the fitted predictor: alpha^T G alpha = alpha^T y - lambda |alpha|^2
  double rkhs_norm_sq(const Vec& targets) const {
    if (t_ == 0) {
      if (targets.size() != 0) throw std::invalid_argument("regressor: target length mismatch");
      return 0.0;
    }
    Vec alpha = solve(targets);
    return std::max(alpha.dot(targets) - lambda_ * alpha.squaredNorm(), 0.0);
  }

  void push(const Vec& x) {
    const Vec col = kernel_column(x);
    push_with_column(x, col);
  }

  // push with the kernel column against the current anchors already computed
  void push_with_column(const Vec& x, const Vec& col) {
    if (x.size() != kernel_.dim()) throw std::invalid_argument("regressor: feature dimension mismatch");
    ensure_capacity(t_ + 1);
    const double kxx = kernel_.self(x);
    Vec w = col;
    forward_solve_in_place(w);
    const double d2 = kxx + lambda_ - w.squaredNorm();
    if (!(d2 > 0.0) || !std::isfinite(d2))
      throw std::runtime_error("regressor: Cholesky border lost positive definiteness");
    anchors_.row(t_) = x.transpose();
    gram_.block(t_, 0, 1, t_) = col.transpose();
    gram_.block(0, t_, t_, 1) = col;
    gram_(t_, t_) = kxx;
    chol_.block(t_, 0, 1, t_) = w.transpose();
    chol_(t_, t_) = std::sqrt(d2);
    log_det_ratio_ += std::log(d2 / lambda_);
    ++t_;
  }

  // ln det(I + G/lambda), accumulated from the Cholesky pivots
  double log_det_ratio() const { return log_det_ratio_; }

  const Mat& anchor_storage() const { return anchors_; }
  Eigen::Block<const Mat> gram() const { return gram_.topLeftCorner(t_, t_); }
  Eigen::Block<const Mat> chol() const { return chol_.topLeftCorner(t_, t_); }

  // relative Frobenius error of L L^T against G + lambda I (test support)
  double factor_residual() const {
    if (t_ == 0) return 0.0;
    Mat reg = gram();
    reg.diagonal().array() += lambda_;
    auto L = chol_.topLeftCorner(t_, t_);
    return (L * L.transpose() - reg).norm() / reg.norm();
  }

 private:
  void ensure_capacity(int n) {
    const int cap = static_cast<int>(chol_.rows());
    if (n <= cap) return;
    int grown = cap;
    while (grown < n) grown *= 2;
    anchors_.conservativeResize(grown, Eigen::NoChange);
    gram_.conservativeResize(grown, grown);
    Mat newchol = Mat::Zero(grown, grown);
    newchol.topLeftCorner(t_, t_) = chol_.topLeftCorner(t_, t_);
    chol_.swap(newchol);
  }

  Kernel kernel_;
  double lambda_;
  int t_ = 0;
  double log_det_ratio_ = 0.0;
  Mat anchors_;
  Mat gram_;
  Mat chol_;
};

}  // namespace kql
