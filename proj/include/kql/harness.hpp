#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kql/agent.hpp"
#include "kql/dimension.hpp"
#include "kql/envs.hpp"
#include "kql/finite_mdp.hpp"
#include "kql/rng.hpp"

namespace kql {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string env;                  // mountaincar | pendulum | acrobot | cartpole
  std::string kernel = "rbf";       // linear | rbf
  double eta = -1.0;                // < 0: environment default (0.02, pendulum 1)
  double gamma = 0.95;
  int steps = 1000;                 // training budget T
  double lambda = -1.0;             // < 0: auto = 1/(10 T)
  std::string beta = "auto";        // auto = sqrt(lambda)/(1-gamma) | theory | number
  std::uint64_t seed = 1;
  int eval_episodes = 100;
  std::string eval_policy = "greedy";  // greedy | ucb
  std::string out;                  // output path prefix; empty writes nothing
  std::string reward_variant = "default";  // default | flat
  int width_check_interval = 100;
};

struct StepRecord {
  int t;
  int episode;
  int action;
  double raw_reward;
  double norm_reward;
  bool done;
  double q_tilde;  // optimistic value of the chosen action before the update
  double width;    // confidence width of the chosen action before the update
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<double> eval_returns;  // raw undiscounted return per episode
  double eval_mean = 0.0;
  double eval_std = 0.0;  // population convention
  double resolved_lambda = 0.0;
  double resolved_beta = 0.0;
  double resolved_eta = 0.0;
  double max_width_drift = 0.0;
  double min_width = 0.0;
  std::uint64_t digest_before_eval = 0;
  std::uint64_t digest_after_eval = 0;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

inline double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return xs.empty() ? 0.0 : m / xs.size();
}

inline double population_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / xs.size());
}

}  // namespace detail

inline Kernel make_kernel(const std::string& name, double eta, int state_dim,
                          int num_actions) {
  if (name == "linear") return Kernel::linear(state_dim, num_actions);
  if (name == "rbf") return Kernel::gaussian_rbf(eta, state_dim, num_actions);
  throw ConfigError("unknown kernel: " + name);
}

struct ResolvedParams {
  double lambda;
  double beta;
  double eta;
};

inline ResolvedParams resolve_params(const RunConfig& cfg, const Env& env) {
  ResolvedParams p{};
  p.eta = cfg.eta >= 0.0 ? cfg.eta : env.default_eta();
  p.lambda = cfg.lambda > 0.0 ? cfg.lambda : 1.0 / (10.0 * cfg.steps);
  if (cfg.beta == "auto") {
    p.beta = std::sqrt(p.lambda) / (1.0 - cfg.gamma);
  } else if (cfg.beta == "theory") {
    KernelDescriptor desc{cfg.kernel == "linear" ? KernelKind::kLinear : KernelKind::kGaussianRbf,
                          env.state_dim() + env.num_actions(), p.eta};
    TheoryParams tp;
    tp.T = cfg.steps;
    tp.gamma = cfg.gamma;
    tp.lambda = p.lambda;
    tp.rho = 1.0;
    tp.epsilon = 0.0;
    tp.sigma = 0.0;  // the built-in environments are deterministic
    tp.p = 0.05;
    tp.d_lambda = desc.kind == KernelKind::kLinear
                      ? d_lambda_bound_linear(desc.dim)
                      : d_lambda_bound_gaussian(desc.dim, p.eta, cfg.steps, p.lambda);
    tp.c_lambda = c_lambda_bound(desc, cfg.steps, p.lambda, cfg.gamma);
    p.beta = theoretical_beta(tp);
  } else {
    try {
      size_t pos = 0;
      p.beta = std::stod(cfg.beta, &pos);
      if (pos != cfg.beta.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("beta must be 'auto', 'theory', or a number: " + cfg.beta);
    }
  }
  return p;
}

inline RewardVariant parse_variant(const std::string& v) {
  if (v == "default") return RewardVariant::kDefault;
  if (v == "flat") return RewardVariant::kFlat;
  throw ConfigError("unknown reward variant: " + v);
}

// Trains a fresh agent for exactly cfg.steps environment steps (resets only
// after done), then evaluates eval_episodes episodes with the configured
// policy and no further learning. Writes <out>.train.csv and <out>.eval.csv.
inline RunLog run_experiment(const RunConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
  if (cfg.eval_episodes < 0) throw ConfigError("eval-episodes must be >= 0");
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("gamma must be in [0,1)");
  if (cfg.eval_policy != "greedy" && cfg.eval_policy != "ucb")
    throw ConfigError("eval-policy must be greedy or ucb");
  auto env = make_env(cfg.env, Rng::mix(cfg.seed, 0), parse_variant(cfg.reward_variant));
  const ResolvedParams p = resolve_params(cfg, *env);

  AgentConfig acfg{cfg.steps,
                   cfg.gamma,
                   p.lambda,
                   p.beta,
                   make_kernel(cfg.kernel, p.eta, env->state_dim(), env->num_actions()),
                   env->num_actions(),
                   env->bounds(),
                   cfg.width_check_interval};
  KqlAgent agent(acfg);

  RunLog log;
  log.resolved_lambda = p.lambda;
  log.resolved_beta = p.beta;
  log.resolved_eta = p.eta;
  log.steps.reserve(cfg.steps);

  Vec s = env->reset();
  int episode = 0;
  for (int t = 1; t <= cfg.steps; ++t) {
    const int a = agent.select_action(s);
    const double qt = agent.q_tilde(s, a);
    const double w = agent.ucb_width(s, a);
    const StepResult r = env->step(a);
    agent.observe(s, a, r.norm_reward, r.next_state, r.terminal);
    log.steps.push_back({t, episode, a, r.raw_reward, r.norm_reward, r.done, qt, w});
    if (r.done) {
      s = env->reset();
      ++episode;
    } else {
      s = r.next_state;
    }
  }

  log.digest_before_eval = agent.state_digest();
  const KqlAgent& frozen = agent;
  const bool ucb_eval = cfg.eval_policy == "ucb";
  for (int e = 0; e < cfg.eval_episodes; ++e) {
    Vec es = env->reset();
    double total = 0.0;
    for (int i = 0; i < env->episode_cap(); ++i) {
      const int a = ucb_eval ? frozen.select_action(es) : frozen.greedy_action(es);
      const StepResult r = env->step(a);
      total += r.raw_reward;
      es = r.next_state;
      if (r.done) break;
    }
    log.eval_returns.push_back(total);
  }
  log.digest_after_eval = frozen.state_digest();
  log.eval_mean = detail::mean_of(log.eval_returns);
  log.eval_std = detail::population_std(log.eval_returns);
  log.max_width_drift = agent.max_width_drift();
  log.min_width = agent.min_width_seen();

  if (!cfg.out.empty()) {
    std::ostringstream train;
    train << "t,episode,action,raw_reward,norm_reward,done,q_tilde,width\n";
    for (const auto& rec : log.steps)
      train << rec.t << ',' << rec.episode << ',' << rec.action << ','
            << detail::format_double(rec.raw_reward) << ','
            << detail::format_double(rec.norm_reward) << ',' << (rec.done ? 1 : 0) << ','
            << detail::format_double(rec.q_tilde) << ','
            << detail::format_double(rec.width) << '\n';
    detail::write_file(cfg.out + ".train.csv", train.str());
    std::ostringstream ev;
    ev << "episode,raw_return\n";
    for (size_t i = 0; i < log.eval_returns.size(); ++i)
      ev << i << ',' << detail::format_double(log.eval_returns[i]) << '\n';
    detail::write_file(cfg.out + ".eval.csv", ev.str());
  }
  return log;
}

struct RegretConfig {
  std::string kernel = "rbf";
  double eta = 1.0;
  int steps = 1000;
  double lambda = -1.0;       // < 0: auto = 1/(10 T)
  std::string beta = "auto";
  std::uint64_t seed = 1;
  double tail_tol = 1e-3;
  std::string out;
  int width_check_interval = 0;
  double rho = 1.0;           // theory-bound parameters
  double p = 0.05;
};

struct RegretPoint {
  int t;
  double cum_regret;
  double theory_bound;
};

struct RegretLog {
  std::vector<RegretPoint> points;
  double total_regret = 0.0;
  int contributing_steps = 0;
};

// Trains on the finite MDP for cfg.steps steps (the stream never resets),
// then scores the realized trajectory against the value-iteration oracle.
// The theory-bound column evaluates the regret bound (hidden constant 1)
// with d_lambda taken as the running pseudo dimension of the visited points.
inline RegretLog run_regret(const RegretConfig& cfg, const FiniteMdp& mdp) {
  if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
  FiniteMdpEnv env(mdp, Rng::mix(cfg.seed, 0));
  RunConfig shim;
  shim.kernel = cfg.kernel;
  shim.eta = cfg.eta;
  shim.gamma = mdp.gamma;
  shim.steps = cfg.steps;
  shim.lambda = cfg.lambda;
  shim.beta = cfg.beta;
  const ResolvedParams p = resolve_params(shim, env);

  AgentConfig acfg{cfg.steps,
                   mdp.gamma,
                   p.lambda,
                   p.beta,
                   make_kernel(cfg.kernel, p.eta, env.state_dim(), env.num_actions()),
                   env.num_actions(),
                   env.bounds(),
                   cfg.width_check_interval};
  KqlAgent agent(acfg);

  std::vector<int> states;
  std::vector<double> rewards;
  std::vector<double> dpse_at;  // running pseudo dimension after each step
  states.reserve(cfg.steps);
  Vec s = env.reset();
  for (int t = 1; t <= cfg.steps; ++t) {
    states.push_back(env.current_state());
    const int a = agent.select_action(s);
    const StepResult r = env.step(a);
    agent.observe(s, a, r.norm_reward, r.next_state, false);
    rewards.push_back(r.raw_reward);
    dpse_at.push_back(agent.regressor().log_det_ratio());
    s = r.next_state;
  }

  const OracleValues oracle = value_iteration(mdp, mdp.gamma, 1e-10);
  const RegretResult res = regret(states, rewards, oracle, mdp.gamma, cfg.tail_tol);

  KernelDescriptor desc{cfg.kernel == "linear" ? KernelKind::kLinear : KernelKind::kGaussianRbf,
                        env.state_dim() + env.num_actions(), p.eta};
  RegretLog log;
  log.total_regret = res.total;
  log.contributing_steps = res.contributing_steps;
  log.points.reserve(res.curve.size());
  for (size_t i = 0; i < res.curve.size(); ++i) {
    TheoryParams tp;
    tp.T = static_cast<double>(i + 1);
    tp.gamma = mdp.gamma;
    tp.lambda = p.lambda;
    tp.rho = cfg.rho;
    tp.epsilon = 0.0;
    tp.sigma = 0.0;
    tp.p = cfg.p;
    tp.d_lambda = std::max(1.0, dpse_at[i]);
    tp.c_lambda = c_lambda_bound(desc, tp.T, p.lambda, mdp.gamma);
    log.points.push_back({static_cast<int>(i + 1), res.curve[i], regret_bound(tp)});
  }

  if (!cfg.out.empty()) {
    std::ostringstream body;
    body << "t,cum_regret,theory_bound\n";
    for (const auto& pt : log.points)
      body << pt.t << ',' << detail::format_double(pt.cum_regret) << ','
           << detail::format_double(pt.theory_bound) << '\n';
    detail::write_file(cfg.out + ".regret.csv", body.str());
  }
  return log;
}

// Random-instance batch checks of the dimension-lab lemmas. Emits one
// "PASS/FAIL name lhs rhs" line per check and returns true when all pass.
inline bool run_checks(const std::vector<int>& sizes, const std::vector<int>& seeds,
                       std::ostream& out) {
  bool all_pass = true;
  auto emit = [&](const CheckRecord& rec, int size, int seed) {
    out << (rec.pass ? "PASS" : "FAIL") << ' ' << rec.name << "[n=" << size
        << ",seed=" << seed << "] " << detail::format_double(rec.lhs) << ' '
        << detail::format_double(rec.rhs) << '\n';
    all_pass = all_pass && rec.pass;
  };
  const double lambdas[] = {1e-4, 1e-2, 1.0, 10.0};
  const double gammas[] = {0.0, 0.5, 0.95};
  for (int size : sizes) {
    for (int seed : seeds) {
      Rng rng(Rng::mix(static_cast<std::uint64_t>(seed), size));
      const int d = 2 + static_cast<int>(rng.uniform_int(4));
      // points on or inside the unit ball, as the closed-form bounds assume
      Mat pts(size, d);
      for (int i = 0; i < size; ++i) {
        Vec v(d);
        for (int j = 0; j < d; ++j) v[j] = rng.uniform(-1.0, 1.0);
        const double norm = v.norm();
        if (norm > 1.0) v /= norm;
        pts.row(i) = v.transpose();
      }
      const double eta = rng.uniform() < 0.5 ? 0.02 : 1.0;
      Mat gram_rbf(size, size), gram_lin(size, size);
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          gram_rbf(i, j) = std::exp(-eta * (pts.row(i) - pts.row(j)).squaredNorm());
          gram_lin(i, j) = pts.row(i).dot(pts.row(j));
        }
      for (double lambda : lambdas) {
        for (const auto& [label, gram] :
             {std::pair<const char*, const Mat*>{"rbf", &gram_rbf},
              std::pair<const char*, const Mat*>{"linear", &gram_lin}}) {
          const DimQuery q{*gram, lambda};
          const double deff = effective_dimension(q);
          const double dpse = pseudo_dimension(q);
          const double dual = effective_dimension_dual_identity(q);
          const double rel = std::abs(dual - deff) / std::max(deff, 1e-12);
          emit({rel <= 1e-6, std::string("deff_dual_identity_") + label, dual, deff},
               size, seed);
          emit({dpse <= std::log(std::exp(1.0) * (size + lambda) / lambda) * deff +
                            1e-12,
                std::string("dpse_le_log_deff_") + label, dpse,
                std::log(std::exp(1.0) * (size + lambda) / lambda) * deff},
               size, seed);
          CheckRecord mono = check_monotonicity(*gram, lambda);
          mono.name = std::string("monotone_") + label + "_" + mono.name;
          emit(mono, size, seed);
          for (double gamma : gammas) {
            CheckRecord ucb = check_sum_of_ucb(*gram, lambda, gamma);
            ucb.name = std::string("sum_of_ucb_") + label + "[gamma=" +
                       detail::format_double(gamma) + "]";
            emit(ucb, size, seed);
          }
        }
        // closed-form bound domination
        const double deff_lin = effective_dimension({gram_lin, lambda});
        emit({deff_lin <= d_lambda_bound_linear(d) + 1e-9, "deff_bound_linear",
              deff_lin, d_lambda_bound_linear(d)},
             size, seed);
        if (lambda <= size) {
          const double deff_rbf = effective_dimension({gram_rbf, lambda});
          const double bound = d_lambda_bound_gaussian(d, eta, size, lambda);
          emit({deff_rbf <= bound + 1e-9, "deff_bound_gaussian", deff_rbf, bound},
               size, seed);
        }
      }
    }
  }
  return all_pass;
}

// "Mean +/- Std" cell in the reporting convention: population std, two decimals
inline std::string format_mean_std(const std::vector<double>& returns) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", detail::mean_of(returns),
                detail::population_std(returns));
  return buf;
}

// Pools evaluation returns per (environment, kernel) cell across seeds and
// renders the table: kernels as rows, environments as columns.
struct SummaryCell {
  std::string env;
  std::string kernel;
  std::vector<double> returns;
};

inline std::string summarize(const std::vector<SummaryCell>& cells) {
  if (cells.empty()) throw std::invalid_argument("summarize: no cells");
  std::vector<std::string> envs, kernels;
  for (const auto& c : cells) {
    if (std::find(envs.begin(), envs.end(), c.env) == envs.end()) envs.push_back(c.env);
    if (std::find(kernels.begin(), kernels.end(), c.kernel) == kernels.end())
      kernels.push_back(c.kernel);
  }
  std::ostringstream out;
  out << "# cell = Mean ± Std of evaluation returns pooled across seeds"
         " (population std)\n";
  out << "kernel";
  for (const auto& e : envs) out << '\t' << e;
  out << '\n';
  for (const auto& k : kernels) {
    out << k;
    for (const auto& e : envs) {
      const auto it = std::find_if(cells.begin(), cells.end(), [&](const SummaryCell& c) {
        return c.env == e && c.kernel == k;
      });
      out << '\t' << (it == cells.end() ? std::string("-") : format_mean_std(it->returns));
    }
    out << '\n';
  }
  return out.str();
}

// Fans independent run configurations across worker threads; results land in
// input order regardless of completion order.
inline std::vector<RunLog> run_many(const std::vector<RunConfig>& configs,
                                    int max_workers = 0) {
  std::vector<RunLog> logs(configs.size());
  if (configs.empty()) return logs;
  unsigned workers = max_workers > 0 ? static_cast<unsigned>(max_workers)
                                     : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, static_cast<unsigned>(configs.size()));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(configs.size());
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (size_t i = w; i < configs.size(); i += workers) {
        try {
          logs[i] = run_experiment(configs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return logs;
}

}  // namespace kql
