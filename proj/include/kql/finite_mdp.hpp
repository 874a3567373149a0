#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kql/envs.hpp"

namespace kql {

// Explicit finite MDP with tabular one-hot features. Loadable from a plain
// text table: header "states actions gamma", then one line per (s, a):
//   s a r p(s'=0) p(s'=1) ...
struct FiniteMdp {
  int num_states = 0;
  int num_actions = 0;
  double gamma = 0.95;
  Mat reward;      // num_states x num_actions, entries in [0, 1]
  Mat transition;  // (num_states * num_actions) x num_states, rows sum to 1

  int row(int s, int a) const { return s * num_actions + a; }

  void validate() const {
    if (num_states <= 0 || num_actions <= 0)
      throw std::invalid_argument("mdp: need at least one state and action");
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw std::invalid_argument("mdp: gamma must be in [0,1)");
    if (reward.rows() != num_states || reward.cols() != num_actions ||
        transition.rows() != num_states * num_actions ||
        transition.cols() != num_states)
      throw std::invalid_argument("mdp: table shape mismatch");
    if (reward.minCoeff() < 0.0 || reward.maxCoeff() > 1.0)
      throw std::invalid_argument("mdp: rewards must lie in [0,1]");
    for (int r = 0; r < transition.rows(); ++r) {
      if (transition.row(r).minCoeff() < 0.0)
        throw std::invalid_argument("mdp: negative transition probability");
      if (std::abs(transition.row(r).sum() - 1.0) > 1e-12)
        throw std::invalid_argument("mdp: transition row does not sum to 1");
    }
  }

  static FiniteMdp load(std::istream& in) {
    FiniteMdp mdp;
    if (!(in >> mdp.num_states >> mdp.num_actions >> mdp.gamma))
      throw std::invalid_argument("mdp: malformed header");
    if (mdp.num_states <= 0 || mdp.num_actions <= 0)
      throw std::invalid_argument("mdp: malformed header");
    mdp.reward = Mat::Zero(mdp.num_states, mdp.num_actions);
    mdp.transition = Mat::Zero(mdp.num_states * mdp.num_actions, mdp.num_states);
    std::vector<bool> seen(mdp.num_states * mdp.num_actions, false);
    int s, a;
    while (in >> s >> a) {
      if (s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions)
        throw std::invalid_argument("mdp: state/action index out of range");
      if (!(in >> mdp.reward(s, a))) throw std::invalid_argument("mdp: malformed row");
      for (int sp = 0; sp < mdp.num_states; ++sp)
        if (!(in >> mdp.transition(mdp.row(s, a), sp)))
          throw std::invalid_argument("mdp: malformed row");
      seen[mdp.row(s, a)] = true;
    }
    for (bool b : seen)
      if (!b) throw std::invalid_argument("mdp: missing (state, action) row");
    mdp.validate();
    return mdp;
  }

  static FiniteMdp load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("mdp: cannot open " + path);
    return load(in);
  }

  void save(std::ostream& out) const {
    out << num_states << " " << num_actions << " " << gamma << "\n";
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) {
        out << s << " " << a << " " << reward(s, a);
        for (int sp = 0; sp < num_states; ++sp) out << " " << transition(row(s, a), sp);
        out << "\n";
      }
  }
};

struct OracleValues {
  Vec v_star;
  Mat q_star;
  std::vector<int> policy_star;
  double residual = 0.0;
};

// Exact Bellman solve: iterates V <- max_a (r + gamma P V) until the sup-norm
// residual drops below tol. Ties in the policy break to the lowest action.
inline OracleValues value_iteration(const FiniteMdp& mdp, double gamma, double tol = 1e-10) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("value_iteration: gamma must be in [0,1)");
  mdp.validate();
  const int S = mdp.num_states, A = mdp.num_actions;
  Vec v = Vec::Zero(S);
  Mat q = Mat::Zero(S, A);
  double residual = 0.0;
  const int max_iters = 10'000'000;
  for (int it = 0; it < max_iters; ++it) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        q(s, a) = mdp.reward(s, a) + gamma * mdp.transition.row(mdp.row(s, a)).dot(v);
    Vec vn = q.rowwise().maxCoeff();
    residual = (vn - v).cwiseAbs().maxCoeff();
    v = vn;
    if (residual <= tol * (1.0 - gamma)) break;
  }
  OracleValues out;
  out.v_star = v;
  out.q_star = q;
  out.policy_star.resize(S);
  for (int s = 0; s < S; ++s) {
    int best = 0;
    for (int a = 1; a < A; ++a)
      if (q(s, a) > q(s, best)) best = a;
    out.policy_star[s] = best;
  }
  // final Bellman residual of the reported values
  double res = 0.0;
  for (int s = 0; s < S; ++s) {
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a)
      m = std::max(m, mdp.reward(s, a) + gamma * mdp.transition.row(mdp.row(s, a)).dot(v));
    res = std::max(res, std::abs(m - v[s]));
  }
  out.residual = res;
  return out;
}

// Truncated discounted sum over the available suffix, with the a-priori tail
// bound gamma^len / (1 - gamma) for rewards in [0, 1].
inline double discounted_return(const std::vector<double>& rewards, double gamma,
                                double* truncation_bound = nullptr) {
  double acc = 0.0;
  double g = 1.0;
  for (double r : rewards) {
    acc += g * r;
    g *= gamma;
  }
  if (truncation_bound) *truncation_bound = g / (1.0 - gamma);
  return acc;
}

struct RegretResult {
  double total = 0.0;          // (1-gamma) sum_t (V*(s_t) - V_t)
  std::vector<double> curve;   // cumulative, one entry per contributing step
  int contributing_steps = 0;  // steps whose truncation bound <= tail_tol
};

// gamma-discounted regret of a realized trajectory against the oracle values.
// Only steps whose realized-return truncation bound is within tail_tol count.
inline RegretResult regret(const std::vector<int>& states,
                           const std::vector<double>& rewards,
                           const OracleValues& oracle, double gamma,
                           double tail_tol) {
  if (states.size() != rewards.size())
    throw std::invalid_argument("regret: trajectory length mismatch");
  const int T = static_cast<int>(states.size());
  RegretResult out;
  // suffix discounted returns in one backward pass
  std::vector<double> vt(T + 1, 0.0);
  for (int t = T - 1; t >= 0; --t) vt[t] = rewards[t] + gamma * vt[t + 1];
  double cum = 0.0;
  for (int t = 0; t < T; ++t) {
    const double bound = std::pow(gamma, T - t) / (1.0 - gamma);
    if (bound > tail_tol) break;
    if (states[t] < 0 || states[t] >= oracle.v_star.size())
      throw std::invalid_argument("regret: trajectory state outside oracle");
    cum += oracle.v_star[states[t]] - vt[t];
    out.curve.push_back((1.0 - gamma) * cum);
    ++out.contributing_steps;
  }
  out.total = (1.0 - gamma) * cum;
  return out;
}

// Env adapter: observations are one-hot state indicators (bounds [-1, 1] keep
// the embedding's affine map the identity on them). Episodes never end; the
// stream is unbroken as the discounted setting assumes. Start state is 0.
class FiniteMdpEnv : public Env {
 public:
  FiniteMdpEnv(FiniteMdp mdp, std::uint64_t seed)
      : mdp_(std::move(mdp)), rng_(seed) {
    mdp_.validate();
  }

  Vec reset() override {
    state_ = 0;
    return onehot(state_);
  }

  StepResult step(int action) override {
    if (action < 0 || action >= mdp_.num_actions)
      throw std::invalid_argument("mdp env: invalid action");
    const double r = mdp_.reward(state_, action);
    state_ = sample_next(state_, action);
    return {onehot(state_), r, r, false, false};
  }

  int current_state() const { return state_; }
  const FiniteMdp& mdp() const { return mdp_; }

  int state_dim() const override { return mdp_.num_states; }
  int num_actions() const override { return mdp_.num_actions; }
  int episode_cap() const override { return std::numeric_limits<int>::max(); }
  StateBounds bounds() const override {
    return StateBounds(mdp_.num_states, DimBounds{-1.0, 1.0});
  }
  double default_eta() const override { return 1.0; }
  std::string name() const override { return "finite-mdp"; }

 private:
  Vec onehot(int s) const {
    Vec v = Vec::Zero(mdp_.num_states);
    v[s] = 1.0;
    return v;
  }

  int sample_next(int s, int a) {
    const auto row = mdp_.transition.row(mdp_.row(s, a));
    // deterministic rows consume no draw, keeping such runs fully reproducible
    for (int sp = 0; sp < mdp_.num_states; ++sp)
      if (row[sp] == 1.0) return sp;
    const double u = rng_.uniform();
    double acc = 0.0;
    for (int sp = 0; sp < mdp_.num_states; ++sp) {
      acc += row[sp];
      if (u < acc) return sp;
    }
    return mdp_.num_states - 1;
  }

  FiniteMdp mdp_;
  Rng rng_;
  int state_ = 0;
};

// 5-state deterministic chain used by the regret experiments: action 1
// advances toward the last state, action 0 stays; only the last state pays.
inline FiniteMdp make_chain_mdp(int num_states = 5, double gamma = 0.95) {
  FiniteMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = 2;
  mdp.gamma = gamma;
  mdp.reward = Mat::Zero(num_states, 2);
  mdp.transition = Mat::Zero(num_states * 2, num_states);
  for (int s = 0; s < num_states; ++s) {
    mdp.reward(s, 0) = s == num_states - 1 ? 1.0 : 0.0;
    mdp.reward(s, 1) = s == num_states - 1 ? 1.0 : 0.0;
    mdp.transition(mdp.row(s, 0), s) = 1.0;
    mdp.transition(mdp.row(s, 1), std::min(s + 1, num_states - 1)) = 1.0;
  }
  return mdp;
}

}  // namespace kql
