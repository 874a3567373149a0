// Command-line driver for kernelized Q-learning experiments.
//
//   kql train  --env cartpole --kernel rbf --seed 1 --out run1
//   kql regret --mdp data/chain5.mdp --steps 1000 --out chain
//   kql checks --sizes 10,20,30,40,50 --seeds 1,...,20
//   kql table  --env cartpole --kernel rbf --seeds 1,2,3,4,5
//
// Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 I/O error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kql/harness.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::string token;
  std::istringstream in(csv);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    out.push_back(std::stoi(token));
  }
  return out;
}

void print_run_summary(const kql::RunConfig& cfg, const kql::RunLog& log) {
  std::cout << "env=" << cfg.env << " kernel=" << cfg.kernel
            << " eta=" << log.resolved_eta << " lambda=" << log.resolved_lambda
            << " beta=" << log.resolved_beta << " seed=" << cfg.seed << "\n";
  std::cout << "# eval over " << log.eval_returns.size()
            << " episodes (Mean ± population Std of raw returns)\n";
  std::cout << "eval: " << kql::format_mean_std(log.eval_returns) << "\n";
  std::cout << "width-drift max: " << log.max_width_drift
            << "  min-width: " << log.min_width << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernelized Q-learning experiments"};
  app.require_subcommand(1);

  kql::RunConfig run_cfg;
  auto* train = app.add_subcommand("train", "train on a control task, then evaluate");
  train->add_option("--env", run_cfg.env, "mountaincar|pendulum|acrobot|cartpole")
      ->required();
  train->add_option("--kernel", run_cfg.kernel, "linear|rbf");
  train->add_option("--eta", run_cfg.eta, "rbf bandwidth (default: per-env)");
  train->add_option("--gamma", run_cfg.gamma, "discount factor");
  train->add_option("--steps", run_cfg.steps, "training step budget");
  std::string lambda_str = "auto";
  train->add_option("--lambda", lambda_str, "auto | positive number");
  train->add_option("--beta", run_cfg.beta, "auto | theory | number");
  train->add_option("--seed", run_cfg.seed, "run seed");
  train->add_option("--eval-episodes", run_cfg.eval_episodes, "evaluation episodes");
  train->add_option("--eval-policy", run_cfg.eval_policy, "greedy|ucb");
  train->add_option("--out", run_cfg.out, "output path prefix for CSV files");
  train->add_option("--reward-variant", run_cfg.reward_variant, "default|flat");
  train->add_option("--check-interval", run_cfg.width_check_interval,
                    "width consistency check cadence (0 off)");

  kql::RegretConfig regret_cfg;
  std::string mdp_path;
  std::string regret_lambda = "auto";
  auto* regret = app.add_subcommand("regret", "regret curve on a finite MDP");
  regret->add_option("--mdp", mdp_path, "MDP table file")->required();
  regret->add_option("--kernel", regret_cfg.kernel, "linear|rbf");
  regret->add_option("--eta", regret_cfg.eta, "rbf bandwidth");
  regret->add_option("--steps", regret_cfg.steps, "training step budget");
  regret->add_option("--lambda", regret_lambda, "auto | positive number");
  regret->add_option("--beta", regret_cfg.beta, "auto | theory | number");
  regret->add_option("--seed", regret_cfg.seed, "run seed");
  regret->add_option("--tail-tol", regret_cfg.tail_tol,
                     "truncation tolerance for realized returns");
  regret->add_option("--out", regret_cfg.out, "output path prefix");

  std::string sizes_csv = "10,20,30,40,50";
  std::string seeds_csv = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20";
  auto* checks = app.add_subcommand("checks", "dimension-lab lemma checks");
  checks->add_option("--sizes", sizes_csv, "comma-separated point-set sizes");
  checks->add_option("--seeds", seeds_csv, "comma-separated seeds");

  kql::RunConfig table_cfg;
  std::string table_seeds = "1,2,3,4,5";
  auto* table = app.add_subcommand("table", "one table cell pooled across seeds");
  table->add_option("--env", table_cfg.env, "environment")->required();
  table->add_option("--kernel", table_cfg.kernel, "linear|rbf");
  table->add_option("--eta", table_cfg.eta, "rbf bandwidth");
  table->add_option("--steps", table_cfg.steps, "training step budget");
  table->add_option("--seeds", table_seeds, "comma-separated seeds");
  table->add_option("--eval-episodes", table_cfg.eval_episodes, "evaluation episodes");
  int workers = 0;
  table->add_option("--threads", workers, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      run_cfg.lambda = lambda_str == "auto" ? -1.0 : std::stod(lambda_str);
      const kql::RunLog log = kql::run_experiment(run_cfg);
      print_run_summary(run_cfg, log);
      return 0;
    }
    if (regret->parsed()) {
      regret_cfg.lambda = regret_lambda == "auto" ? -1.0 : std::stod(regret_lambda);
      kql::FiniteMdp mdp;
      try {
        mdp = kql::FiniteMdp::load_file(mdp_path);
      } catch (const std::runtime_error& e) {
        throw kql::IoError(e.what());
      }
      const kql::RegretLog log = kql::run_regret(regret_cfg, mdp);
      std::cout << "steps=" << regret_cfg.steps
                << " contributing=" << log.contributing_steps
                << " regret=" << log.total_regret << " regret/step="
                << (log.contributing_steps > 0
                        ? log.total_regret / log.contributing_steps
                        : 0.0)
                << "\n";
      return 0;
    }
    if (checks->parsed()) {
      const bool ok =
          kql::run_checks(parse_int_list(sizes_csv), parse_int_list(seeds_csv), std::cout);
      return ok ? 0 : 1;
    }
    if (table->parsed()) {
      std::vector<kql::RunConfig> cfgs;
      for (int seed : parse_int_list(table_seeds)) {
        kql::RunConfig c = table_cfg;
        c.seed = static_cast<std::uint64_t>(seed);
        c.width_check_interval = 100;
        cfgs.push_back(c);
      }
      const auto logs = kql::run_many(cfgs, workers);
      kql::SummaryCell cell{table_cfg.env, table_cfg.kernel, {}};
      for (const auto& log : logs)
        cell.returns.insert(cell.returns.end(), log.eval_returns.begin(),
                            log.eval_returns.end());
      std::cout << kql::summarize({cell});
      return 0;
    }
  } catch (const kql::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const kql::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
