#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace kql {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct DimBounds {
  double lo;
  double hi;
};
using StateBounds = std::vector<DimBounds>;

// Embeds (state, action) as [normalized state, one-hot action]. Each state
// dimension is clipped to its bounds and affinely mapped into [-1, 1]; the
// action block is a one-hot vector of length num_actions.
inline Vec embed(const Vec& state, int action, const StateBounds& bounds,
                 int num_actions) {
  const int l = static_cast<int>(bounds.size());
  if (state.size() != l) throw std::invalid_argument("embed: state dimension mismatch");
  if (action < 0 || action >= num_actions) throw std::invalid_argument("embed: action index out of range");
  Vec out = Vec::Zero(l + num_actions);
  for (int i = 0; i < l; ++i) {
    const double v = state[i];
    if (!std::isfinite(v)) throw std::invalid_argument("embed: non-finite state entry");
    const DimBounds& b = bounds[i];
    if (!(b.hi > b.lo)) throw std::invalid_argument("embed: degenerate bounds");
    const double clipped = std::min(std::max(v, b.lo), b.hi);
    out[i] = 2.0 * (clipped - b.lo) / (b.hi - b.lo) - 1.0;
  }
  out[l + action] = 1.0;
  return out;
}

enum class KernelKind { kLinear, kGaussianRbf };

// The two kernels over embedded feature vectors x = [s, a]:
//   linear:  x.y / (2(l+1)) + 1/2
//   rbf:     exp(-eta * |x - y|^2)
// Both keep K(x,x) in [1/4, 1] for valid features, so |K_x| lies in [1/2, 1].
class Kernel {
 public:
  static Kernel linear(int state_dim, int num_actions) {
    return Kernel(KernelKind::kLinear, 0.0, state_dim, num_actions);
  }
  static Kernel gaussian_rbf(double eta, int state_dim, int num_actions) {
    if (eta < 0.0) throw std::invalid_argument("kernel: eta must be nonnegative");
    return Kernel(KernelKind::kGaussianRbf, eta, state_dim, num_actions);
  }

  double operator()(const Vec& x, const Vec& y) const {
    check_dim(x);
    if (y.size() != x.size()) throw std::invalid_argument("kernel: dimension mismatch");
    if (kind_ == KernelKind::kLinear) return x.dot(y) * lin_scale_ + 0.5;
    return std::exp(-eta_ * (x - y).squaredNorm());
  }

  double self(const Vec& x) const {
    check_dim(x);
    if (kind_ == KernelKind::kLinear) return x.squaredNorm() * lin_scale_ + 0.5;
    return 1.0;
  }

  // column k[i] = K(X.row(i), z) for the first n rows of X
  Vec column(const Mat& X, int n, const Vec& z) const {
    check_dim(z);
    if (n == 0) return Vec();
    if (kind_ == KernelKind::kLinear)
      return (X.topRows(n) * z * lin_scale_).array() + 0.5;
    Vec d2 = (X.topRows(n).rowwise() - z.transpose()).rowwise().squaredNorm();
    return (-eta_ * d2.array()).exp();
  }

  KernelKind kind() const { return kind_; }
  double eta() const { return eta_; }
  int state_dim() const { return state_dim_; }
  int num_actions() const { return num_actions_; }
  int dim() const { return state_dim_ + num_actions_; }

 private:
  Kernel(KernelKind kind, double eta, int state_dim, int num_actions)
      : kind_(kind), eta_(eta), state_dim_(state_dim), num_actions_(num_actions),
        lin_scale_(1.0 / (2.0 * (state_dim + 1))) {}

  void check_dim(const Vec& x) const {
    if (x.size() != dim()) throw std::invalid_argument("kernel: dimension mismatch");
  }

  KernelKind kind_;
  double eta_;
  int state_dim_;
  int num_actions_;
  double lin_scale_;
};

}  // namespace kql
