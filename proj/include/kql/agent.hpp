#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kql/dual_regressor.hpp"
#include "kql/features.hpp"

namespace kql {

struct AgentConfig {
  int steps;        // environment-step budget T
  double gamma;     // discount in [0, 1)
  double lambda;    // ridge scale
  double beta;      // exploration bonus multiplier
  Kernel kernel;
  int num_actions;
  StateBounds bounds;
  // cadence of the from-scratch width consistency check; 0 disables it
  int width_check_interval = 100;
};

// Kernelized Q-learning agent. Acts by maximizing the clipped optimistic value
//   q~(s, a) = clip_{[0, 1/(1-gamma)]}( q^(s, a) + beta * width(s, a) )
// and after every observed transition refits the value estimate by kernel
// ridge regression on the full history, with targets
//   y_tau = r_tau + gamma * max_a q~(s'_tau, a)   (y_tau = r_tau if terminal),
// where the optimistic values at the stored next states use the pre-update
// estimate and widths. Widths of all stored (next-state, action) pairs are
// maintained through the rank-one downdate
//   width_new^2(z) = width_old^2(z) - u(z)^2 / (1 + s),
// u = W K_x evaluated in dual form, and cross-checked from scratch at a
// configurable cadence.
class KqlAgent {
 public:
  explicit KqlAgent(AgentConfig cfg)
      : cfg_(std::move(cfg)),
        reg_(cfg_.kernel, cfg_.lambda, cfg_.steps + 1),
        qmax_(1.0 / (1.0 - cfg_.gamma)) {
    if (cfg_.steps < 1) throw std::invalid_argument("agent: steps must be >= 1");
    if (!(cfg_.gamma >= 0.0 && cfg_.gamma < 1.0))
      throw std::invalid_argument("agent: gamma must be in [0,1)");
    if (!(cfg_.lambda > 0.0)) throw std::invalid_argument("agent: lambda must be positive");
    const double beta_cap = 2.0 * std::sqrt(cfg_.steps + cfg_.lambda) / (1.0 - cfg_.gamma);
    if (!(cfg_.beta >= 0.0 && cfg_.beta <= beta_cap))
      throw std::invalid_argument("agent: beta outside [0, 2 sqrt(T+lambda)/(1-gamma)]");
    if (static_cast<int>(cfg_.bounds.size()) != cfg_.kernel.state_dim())
      throw std::invalid_argument("agent: bounds/kernel dimension mismatch");
    if (cfg_.num_actions != cfg_.kernel.num_actions())
      throw std::invalid_argument("agent: action-count/kernel mismatch");
    const int rows = cfg_.steps * cfg_.num_actions;
    cached_cols_.setZero(rows, cfg_.steps);
    next_features_.setZero(rows, cfg_.kernel.dim());
    self_kernels_.setZero(rows);
    width_sq_.setZero(rows);
    rewards_.setZero(cfg_.steps);
    terminal_.assign(cfg_.steps, 0);
  }

  const AgentConfig& config() const { return cfg_; }
  int steps_observed() const { return t_; }
  double clip_ceiling() const { return qmax_; }
  const DualRegressor& regressor() const { return reg_; }

  int select_action(const Vec& state) const {
    int best = 0;
    double best_value = -1.0;
    for (int a = 0; a < cfg_.num_actions; ++a) {
      const double v = q_tilde(state, a);
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    return best;
  }

  int greedy_action(const Vec& state) const {
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < cfg_.num_actions; ++a) {
      const double v = q_hat(state, a);
      if (v > best_value) {
        best_value = v;
        best = a;
      }
    }
    return best;
  }

  double q_hat(const Vec& state, int a) const {
    const Vec z = embed(state, a, cfg_.bounds, cfg_.num_actions);
    if (t_ == 0) return 0.0;
    return alpha_.dot(reg_.kernel_column(z));
  }

  double ucb_width(const Vec& state, int a) const {
    const Vec z = embed(state, a, cfg_.bounds, cfg_.num_actions);
    return std::sqrt(reg_.width_sq(z));
  }

  double q_tilde(const Vec& state, int a) const {
    const Vec z = embed(state, a, cfg_.bounds, cfg_.num_actions);
    const double q = t_ == 0 ? 0.0 : alpha_.dot(reg_.kernel_column(z));
    return clip(q + cfg_.beta * std::sqrt(reg_.width_sq(z)));
  }

  void observe(const Vec& state, int action, double norm_reward, const Vec& next_state,
               bool terminal) {
    if (t_ >= cfg_.steps) throw std::runtime_error("agent: step budget exhausted");
    if (!(norm_reward >= 0.0 && norm_reward <= 1.0))
      throw std::invalid_argument("agent: normalized reward outside [0,1]");
    const int t = t_;
    const int na = cfg_.num_actions;
    const int rows = t * na;

    const Vec x = embed(state, action, cfg_.bounds, cfg_.num_actions);
    Mat znew(cfg_.kernel.dim(), na);
    for (int a = 0; a < na; ++a)
      znew.col(a) = embed(next_state, a, cfg_.bounds, cfg_.num_actions);

    // quantities against the pre-update regressor
    const Vec kx = reg_.kernel_column(x);
    Vec wx = kx;
    reg_.forward_solve_in_place(wx);
    const double s_val =
        std::max(cfg_.kernel.self(x) - wx.squaredNorm(), 0.0) / cfg_.lambda;
    Vec cx = wx;
    reg_.back_solve_in_place(cx);

    // regression targets for every stored transition, then the new one
    Vec targets(t + 1);
    Mat proj;  // column 0: q^ at stored features, column 1: cx . k(z)
    if (t > 0) {
      Mat rhs(t, 2);
      rhs.col(0) = alpha_;
      rhs.col(1) = cx;
      proj = cached_cols_.topLeftCorner(rows, t) * rhs;
      for (int tau = 0; tau < t; ++tau) {
        if (terminal_[tau]) {
          targets[tau] = rewards_[tau];
          continue;
        }
        double best = 0.0;
        for (int a = 0; a < na; ++a) {
          const int r = tau * na + a;
          best = std::max(best, clip(proj(r, 0) + cfg_.beta * std::sqrt(width_sq_[r])));
        }
        targets[tau] = rewards_[tau] + cfg_.gamma * best;
      }
    }

    // boundary term: optimistic value of the just-observed next state under
    // the pre-update estimate
    Mat k_next(std::max(t, 1), na);
    if (t > 0)
      for (int a = 0; a < na; ++a) k_next.col(a) = reg_.kernel_column(znew.col(a));
    if (terminal) {
      targets[t] = norm_reward;
    } else {
      Mat wz = k_next.topRows(t);
      reg_.forward_solve_in_place(wz);
      double best = 0.0;
      for (int a = 0; a < na; ++a) {
        const double kzz = cfg_.kernel.self(znew.col(a));
        const double resid = t > 0 ? kzz - wz.col(a).squaredNorm() : kzz;
        const double w2 = std::max(resid, 0.0) / cfg_.lambda;
        const double q = t > 0 ? alpha_.dot(k_next.col(a)) : 0.0;
        best = std::max(best, clip(q + cfg_.beta * std::sqrt(w2)));
        note_width(w2);
      }
      targets[t] = norm_reward + cfg_.gamma * best;
    }
    note_width(s_val);

    // rank-one downdate of all stored widths
    Vec cross;  // K(x, z) for every stored feature; also the new cached column
    if (t > 0) {
      cross = cfg_.kernel.column(next_features_, rows, x);
      Vec u = (cross - proj.col(1)) / cfg_.lambda;
      width_sq_.head(rows) =
          (width_sq_.head(rows) - u.array().square().matrix() / (1.0 + s_val))
              .cwiseMax(0.0);
    }

    reg_.push_with_column(x, kx);

    // extend the cached kernel columns with the new anchor and the new row
    if (t > 0) cached_cols_.block(0, t, rows, 1) = cross;
    for (int a = 0; a < na; ++a) {
      const int r = rows + a;
      if (t > 0) cached_cols_.block(r, 0, 1, t) = k_next.col(a).transpose();
      cached_cols_(r, t) = cfg_.kernel(x, znew.col(a));
      next_features_.row(r) = znew.col(a).transpose();
      self_kernels_[r] = cfg_.kernel.self(znew.col(a));
    }

    // widths of the new row from scratch against the updated factor
    {
      Mat wz = cached_cols_.block(rows, 0, na, t + 1).transpose();
      reg_.forward_solve_in_place(wz);
      for (int a = 0; a < na; ++a) {
        width_sq_[rows + a] =
            std::max(self_kernels_[rows + a] - wz.col(a).squaredNorm(), 0.0) / cfg_.lambda;
        note_width(width_sq_[rows + a]);
      }
    }
    for (int r = 0; r < rows; ++r) note_width(width_sq_[r]);

    rewards_[t] = norm_reward;
    terminal_[t] = terminal ? 1 : 0;
    t_ = t + 1;

    alpha_ = reg_.solve(targets);

    if (cfg_.width_check_interval > 0 && t_ % cfg_.width_check_interval == 0)
      run_width_check();
  }

  // table access (stored next-state rows)
  int table_rows() const { return t_; }
  double table_width(int tau, int a) const {
    return std::sqrt(width_sq_[tau * cfg_.num_actions + a]);
  }
  bool table_terminal(int tau) const { return terminal_[tau] != 0; }
  double table_reward(int tau) const { return rewards_[tau]; }

  // diagnostics
  double max_width_drift() const { return max_width_drift_; }
  double min_width_seen() const { return std::sqrt(min_width_sq_seen_); }
  int width_checks_run() const { return width_checks_run_; }

  // forces the recurrence-vs-from-scratch width comparison now
  double run_width_check() {
    const int rows = t_ * cfg_.num_actions;
    if (rows == 0) return 0.0;
    Mat w = cached_cols_.topLeftCorner(rows, t_).transpose();
    reg_.forward_solve_in_place(w);
    double drift = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double fresh =
          std::max(self_kernels_[r] - w.col(r).squaredNorm(), 0.0) / cfg_.lambda;
      drift = std::max(drift, std::abs(std::sqrt(fresh) - std::sqrt(width_sq_[r])));
    }
    max_width_drift_ = std::max(max_width_drift_, drift);
    ++width_checks_run_;
    return drift;
  }

  // order-insensitive digest of the learned state, for no-learning checks
  std::uint64_t state_digest() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const double* p, int n) {
      const unsigned char* b = reinterpret_cast<const unsigned char*>(p);
      for (int i = 0; i < n * static_cast<int>(sizeof(double)); ++i)
        h = (h ^ b[i]) * 1099511628211ULL;
    };
    const std::uint64_t tt = t_;
    h = (h ^ tt) * 1099511628211ULL;
    if (t_ > 0) {
      feed(alpha_.data(), t_);
      feed(width_sq_.data(), t_ * cfg_.num_actions);
      feed(rewards_.data(), t_);
    }
    return h;
  }

 private:
  double clip(double v) const { return std::min(std::max(v, 0.0), qmax_); }

  void note_width(double w2) {
    if (w2 < min_width_sq_seen_) min_width_sq_seen_ = w2;
  }

  AgentConfig cfg_;
  DualRegressor reg_;
  double qmax_;
  int t_ = 0;
  Vec alpha_;

  Mat cached_cols_;    // (T * A) x T, kernel of anchors against stored features
  Mat next_features_;  // (T * A) x dim
  Vec self_kernels_;   // K(z, z) per stored feature
  Vec width_sq_;       // maintained squared widths per stored feature
  Vec rewards_;
  std::vector<char> terminal_;

  double max_width_drift_ = 0.0;
  double min_width_sq_seen_ = std::numeric_limits<double>::infinity();
  int width_checks_run_ = 0;
};

}  // namespace kql
