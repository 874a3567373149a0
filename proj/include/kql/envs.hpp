#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "kql/features.hpp"
#include "kql/rng.hpp"

namespace kql {

struct StepResult {
  Vec next_state;
  double raw_reward;
  double norm_reward;  // in [0, 1]
  bool terminal;       // true MDP termination (goal reached / pole fell)
  bool done;           // terminal OR episode cap reached; reset after done
};

// Deterministic classic-control dynamics, matching the reference OpenAI Gym
// implementations step for step. The only randomness is the reset draw, which
// comes from a seeded stream. Raw rewards follow the reference environments;
// normalized rewards are affine maps into [0, 1] (see each environment).
class Env {
 public:
  virtual ~Env() = default;
  virtual Vec reset() = 0;
  virtual StepResult step(int action) = 0;
  virtual int state_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual int episode_cap() const = 0;
  virtual StateBounds bounds() const = 0;
  virtual double default_eta() const { return 0.02; }
  virtual std::string name() const = 0;
};

enum class RewardVariant {
  kDefault,  // goal-reaching terminal step carries normalized reward 1
  kFlat,     // sparse environments emit 0 everywhere (sensitivity probe)
};

namespace envdetail {
inline double clampd(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}
inline double wrap_pi(double x) {
  x = std::fmod(x + M_PI, 2.0 * M_PI);
  if (x < 0) x += 2.0 * M_PI;
  return x - M_PI;
}
}  // namespace envdetail

// Cart with a hinged pole; push left/right with 10 N, Euler integration at
// 20 ms. Fails when |x| > 2.4 or |theta| > 12 degrees; reward 1 per step.
// Normalization clips velocities at the classic controller box thresholds
// (0.5 m/s and 50 deg/s) before the affine map.
class CartPoleEnv : public Env {
 public:
  explicit CartPoleEnv(std::uint64_t seed) : rng_(seed), s_(4) {}

  Vec reset() override {
    for (int i = 0; i < 4; ++i) s_[i] = rng_.uniform(-0.05, 0.05);
    steps_ = 0;
    return s_;
  }

  StepResult step(int action) override {
    if (action < 0 || action >= 2) throw std::invalid_argument("cartpole: invalid action");
    if (is_terminal(s_)) return {s_, 0.0, 0.0, true, true};
    const double force = action == 1 ? kForce : -kForce;
    const double x = s_[0], xd = s_[1], th = s_[2], thd = s_[3];
    const double costh = std::cos(th), sinth = std::sin(th);
    const double temp = (force + kPoleMassLength * thd * thd * sinth) / kTotalMass;
    const double thacc = (kGravity * sinth - costh * temp) /
                         (kLength * (4.0 / 3.0 - kMassPole * costh * costh / kTotalMass));
    const double xacc = temp - kPoleMassLength * thacc * costh / kTotalMass;
    s_[0] = x + kTau * xd;
    s_[1] = xd + kTau * xacc;
    s_[2] = th + kTau * thd;
    s_[3] = thd + kTau * thacc;
    ++steps_;
    const bool term = is_terminal(s_);
    return {s_, 1.0, 1.0, term, term || steps_ >= episode_cap()};
  }

  static bool is_terminal(const Vec& s) {
    return std::abs(s[0]) > kXLimit || std::abs(s[2]) > kThetaLimit;
  }

  int state_dim() const override { return 4; }
  int num_actions() const override { return 2; }
  int episode_cap() const override { return 200; }
  StateBounds bounds() const override {
    return {{-4.8, 4.8}, {-0.5, 0.5}, {-kThetaLimit, kThetaLimit}, {-0.87, 0.87}};
  }
  std::string name() const override { return "cartpole"; }

  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kLength = 0.5;  // half pole length
  static constexpr double kPoleMassLength = kMassPole * kLength;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kXLimit = 2.4;
  static constexpr double kThetaLimit = 12.0 * 2.0 * M_PI / 360.0;

 private:
  Rng rng_;
  Vec s_;
  int steps_ = 0;
};

// Underpowered car in a valley; actions push left / coast / push right.
// Reaching position >= 0.5 terminates. Raw reward -1 per step; the normalized
// reward is 0 per step with a bonus of 1 on the goal-reaching step (an affine
// map of the constant raw reward would erase all signal).
class MountainCarEnv : public Env {
 public:
  MountainCarEnv(std::uint64_t seed, RewardVariant variant = RewardVariant::kDefault)
      : rng_(seed), variant_(variant), s_(2) {}

  Vec reset() override {
    s_[0] = rng_.uniform(-0.6, -0.4);
    s_[1] = 0.0;
    steps_ = 0;
    return s_;
  }

  StepResult step(int action) override {
    if (action < 0 || action >= 3) throw std::invalid_argument("mountaincar: invalid action");
    if (is_terminal(s_)) return {s_, 0.0, 0.0, true, true};
    double v = s_[1] + (action - 1) * kForce + std::cos(3.0 * s_[0]) * (-kGravity);
    v = envdetail::clampd(v, -kMaxSpeed, kMaxSpeed);
    double p = envdetail::clampd(s_[0] + v, kMinPos, kMaxPos);
    if (p == kMinPos && v < 0) v = 0.0;
    s_[0] = p;
    s_[1] = v;
    ++steps_;
    const bool goal = is_terminal(s_);
    const double norm = (goal && variant_ == RewardVariant::kDefault) ? 1.0 : 0.0;
    return {s_, -1.0, norm, goal, goal || steps_ >= episode_cap()};
  }

  static bool is_terminal(const Vec& s) { return s[0] >= kGoalPos; }

  int state_dim() const override { return 2; }
  int num_actions() const override { return 3; }
  int episode_cap() const override { return 200; }
  StateBounds bounds() const override {
    return {{kMinPos, kMaxPos}, {-kMaxSpeed, kMaxSpeed}};
  }
  std::string name() const override { return "mountaincar"; }

  static constexpr double kForce = 0.001;
  static constexpr double kGravity = 0.0025;
  static constexpr double kMinPos = -1.2;
  static constexpr double kMaxPos = 0.6;
  static constexpr double kMaxSpeed = 0.07;
  static constexpr double kGoalPos = 0.5;

 private:
  Rng rng_;
  RewardVariant variant_;
  Vec s_;
  int steps_ = 0;
};

// Two-link underactuated arm, torque {-1, 0, +1} on the second joint, RK4
// integration at 0.2 s. Terminates when the tip rises above one link length.
// Observation is (cos t1, sin t1, cos t2, sin t2, dt1, dt2). Raw reward -1
// per step and 0 on the goal step; normalized reward 1 on the goal step.
class AcrobotEnv : public Env {
 public:
  AcrobotEnv(std::uint64_t seed, RewardVariant variant = RewardVariant::kDefault)
      : rng_(seed), variant_(variant), st_(Eigen::Vector4d::Zero()) {}

  Vec reset() override {
    for (int i = 0; i < 4; ++i) st_[i] = rng_.uniform(-0.1, 0.1);
    steps_ = 0;
    return observation();
  }

  StepResult step(int action) override {
    if (action < 0 || action >= 3) throw std::invalid_argument("acrobot: invalid action");
    if (goal(st_)) return {observation(), 0.0, 0.0, true, true};
    const double torque = static_cast<double>(action - 1);
    rk4(torque);
    st_[0] = envdetail::wrap_pi(st_[0]);
    st_[1] = envdetail::wrap_pi(st_[1]);
    st_[2] = envdetail::clampd(st_[2], -kMaxVel1, kMaxVel1);
    st_[3] = envdetail::clampd(st_[3], -kMaxVel2, kMaxVel2);
    ++steps_;
    const bool g = goal(st_);
    const double norm = (g && variant_ == RewardVariant::kDefault) ? 1.0 : 0.0;
    return {observation(), g ? 0.0 : -1.0, norm, g, g || steps_ >= episode_cap()};
  }

  static bool goal(const Vec& st) {
    return -std::cos(st[0]) - std::cos(st[1] + st[0]) > 1.0;
  }

  Vec internal_state() const { return st_; }

  int state_dim() const override { return 6; }
  int num_actions() const override { return 3; }
  int episode_cap() const override { return 500; }
  StateBounds bounds() const override {
    return {{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}, {-kMaxVel1, kMaxVel1}, {-kMaxVel2, kMaxVel2}};
  }
  std::string name() const override { return "acrobot"; }

  static constexpr double kMaxVel1 = 4.0 * M_PI;
  static constexpr double kMaxVel2 = 9.0 * M_PI;

 private:
  Vec observation() const {
    Vec o(6);
    o << std::cos(st_[0]), std::sin(st_[0]), std::cos(st_[1]), std::sin(st_[1]), st_[2], st_[3];
    return o;
  }

  static Eigen::Vector4d dynamics(const Eigen::Vector4d& s, double torque) {
    constexpr double m1 = 1.0, m2 = 1.0, l1 = 1.0, lc1 = 0.5, lc2 = 0.5;
    constexpr double I1 = 1.0, I2 = 1.0, g = 9.8;
    const double t1 = s[0], t2 = s[1], d1 = s[2], d2 = s[3];
    const double dd1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * std::cos(t2)) + I1 + I2;
    const double dd2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + I2;
    const double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - M_PI / 2.0);
    const double phi1 = -m2 * l1 * lc2 * d2 * d2 * std::sin(t2) -
                        2 * m2 * l1 * lc2 * d2 * d1 * std::sin(t2) +
                        (m1 * lc1 + m2 * l1) * g * std::cos(t1 - M_PI / 2.0) + phi2;
    const double a2 = (torque + dd2 / dd1 * phi1 - m2 * l1 * lc2 * d1 * d1 * std::sin(t2) - phi2) /
                      (m2 * lc2 * lc2 + I2 - dd2 * dd2 / dd1);
    const double a1 = -(dd2 * a2 + phi1) / dd1;
    return {d1, d2, a1, a2};
  }

  void rk4(double torque) {
    constexpr double dt = 0.2;
    const Eigen::Vector4d s0 = st_;
    const Eigen::Vector4d k1 = dynamics(s0, torque);
    const Eigen::Vector4d k2 = dynamics(s0 + dt / 2.0 * k1, torque);
    const Eigen::Vector4d k3 = dynamics(s0 + dt / 2.0 * k2, torque);
    const Eigen::Vector4d k4 = dynamics(s0 + dt * k3, torque);
    st_ = s0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Rng rng_;
  RewardVariant variant_;
  Eigen::Vector4d st_;
  int steps_ = 0;
};

// Torque-limited pendulum swing-up with the action set discretized to three
// torque levels {0, -2, +2} N.m (coast is action 0 so that early optimistic
// ties do nothing rather than spin the pendulum up). Observation is
// (cos theta, sin theta, thetadot); never terminates, episodes end at the cap.
// Raw reward -(angle^2 + 0.1 thetadot^2 + 0.001 u^2), normalized by its
// documented range 16.2736044.
class PendulumEnv : public Env {
 public:
  explicit PendulumEnv(std::uint64_t seed) : rng_(seed) {}

  Vec reset() override {
    th_ = rng_.uniform(-M_PI, M_PI);
    thd_ = rng_.uniform(-1.0, 1.0);
    steps_ = 0;
    return observation();
  }

  StepResult step(int action) override {
    if (action < 0 || action >= 3) throw std::invalid_argument("pendulum: invalid action");
    const double u = kTorques[action];
    const double angle = envdetail::wrap_pi(th_);
    const double cost = angle * angle + 0.1 * thd_ * thd_ + 0.001 * u * u;
    thd_ += (3.0 * kGravity / (2.0 * kLength) * std::sin(th_) +
             3.0 / (kMass * kLength * kLength) * u) * kDt;
    thd_ = envdetail::clampd(thd_, -kMaxSpeed, kMaxSpeed);
    th_ += thd_ * kDt;
    ++steps_;
    const double raw = -cost;
    return {observation(), raw, (raw + kRawRange) / kRawRange, false,
            steps_ >= episode_cap()};
  }

  int state_dim() const override { return 3; }
  int num_actions() const override { return 3; }
  int episode_cap() const override { return 200; }
  StateBounds bounds() const override {
    return {{-1, 1}, {-1, 1}, {-kMaxSpeed, kMaxSpeed}};
  }
  double default_eta() const override { return 1.0; }
  std::string name() const override { return "pendulum"; }

  double torque_of(int action) const { return kTorques[action]; }

  static constexpr double kTorques[3] = {0.0, -2.0, 2.0};
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  // pi^2 + 0.1 * 8^2 + 0.001 * 2^2
  static constexpr double kRawRange = 16.2736044;

 private:
  Vec observation() const {
    Vec o(3);
    o << std::cos(th_), std::sin(th_), thd_;
    return o;
  }

  Rng rng_;
  double th_ = 0.0;
  double thd_ = 0.0;
  int steps_ = 0;
};

inline std::unique_ptr<Env> make_env(const std::string& name, std::uint64_t seed,
                                     RewardVariant variant = RewardVariant::kDefault) {
  if (name == "cartpole") return std::make_unique<CartPoleEnv>(seed);
  if (name == "mountaincar") return std::make_unique<MountainCarEnv>(seed, variant);
  if (name == "acrobot") return std::make_unique<AcrobotEnv>(seed, variant);
  if (name == "pendulum") return std::make_unique<PendulumEnv>(seed);
  throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace kql
