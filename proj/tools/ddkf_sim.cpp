// Command-line driver: run, sweep, topology, selftest.
//
// Exit codes: 0 ok, 2 config parse error, 3 numeric failure, 4 I/O failure
// (including a missing config file), 5 unknown config key, 6 config
// invariant violation, 1 anything else. A failed selftest check exits 3.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ddkf/config.hpp"
#include "ddkf/experiment.hpp"
#include "ddkf/outputs.hpp"
#include "ddkf/testing/checks.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out_dir = "out";
  std::string policy;
  std::size_t jobs = 1;
  std::size_t weights_every = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_policy = true) {
  cmd->add_option("--config", a.config, "experiment config (key = value or JSON, e.g. run_meta.json)");
  cmd->add_option("--seed", a.seed, "override the master seed");
  cmd->add_option("--trials", a.trials, "override n_trials");
  cmd->add_option("--out-dir", a.out_dir, "output directory")->capture_default_str();
  if (with_policy) cmd->add_option("--policy", a.policy, "uniform | metropolis | relvar | adaptive");
  cmd->add_option("--jobs", a.jobs, "worker threads; output does not depend on it")
      ->capture_default_str();
  cmd->add_option("--weights-every", a.weights_every,
                  "snapshot combination weights of trial 0 every k iterations (0 = off)")
      ->capture_default_str();
}

ddkf::Policy to_policy(const std::string& name) {
  const auto p = ddkf::parse_policy(name);
  if (!p) {
    throw ddkf::ConfigError(ddkf::ConfigError::Kind::kParse,
                            "unknown policy '" + name + "' (uniform, metropolis, relvar, adaptive)");
  }
  return *p;
}

ddkf::ExperimentConfig resolve_config(const CommonArgs& a) {
  ddkf::ExperimentConfig cfg = a.config.empty() ? ddkf::ExperimentConfig{} : ddkf::load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials) cfg.n_trials = *a.trials;
  if (!a.policy.empty()) cfg.policy = to_policy(a.policy);
  ddkf::validate(cfg);
  return cfg;
}

ddkf::RunOptions run_options(const CommonArgs& a) {
  ddkf::RunOptions r;
  r.jobs = a.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.jobs;
  r.weights_every = a.weights_every;
  return r;
}

void print_summary(const std::vector<ddkf::ExperimentResult>& results) {
  for (const auto& r : results) {
    std::cout << ddkf::policy_name(r.policy) << ':';
    for (std::size_t l = 0; l < r.msd.size(); ++l) {
      std::cout << (l == 0 ? " network " : " cluster" + std::to_string(l) + " ")
                << ddkf::testing::fmt(ddkf::steady_state_level(r.msd[l].db())) << " dB";
    }
    std::size_t perfect = 0;
    for (double s : r.recovery) perfect += s == 1.0 ? 1 : 0;
    std::cout << "; perfect recovery " << perfect << '/' << r.recovery.size() << '\n';
  }
}

int cmd_run(const CommonArgs& a) {
  const auto cfg = resolve_config(a);
  const std::vector<ddkf::ExperimentResult> results{
      ddkf::run_experiment(cfg, cfg.policy, run_options(a))};
  ddkf::write_outputs(a.out_dir, cfg, results);
  print_summary(results);
  return kExitOk;
}

int cmd_sweep(const CommonArgs& a, const std::string& policies_csv) {
  auto cfg = resolve_config(a);
  std::vector<ddkf::Policy> policies;
  std::stringstream ss(policies_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) policies.push_back(to_policy(item));
  }
  if (policies.empty()) {
    throw ddkf::ConfigError(ddkf::ConfigError::Kind::kParse, "--policies lists no policy");
  }
  const auto results = ddkf::policy_sweep(cfg, policies, run_options(a));
  ddkf::write_outputs(a.out_dir, cfg, results);
  print_summary(results);
  return kExitOk;
}

int cmd_topology(const CommonArgs& a, std::size_t trial) {
  const auto cfg = resolve_config(a);
  const ddkf::TrialSetup setup = ddkf::make_trial_setup(cfg, trial);
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec) throw ddkf::IoError("cannot create " + a.out_dir + ": " + ec.message());
  const std::filesystem::path dir(a.out_dir);
  ddkf::detail::write_file(dir / "topology_initial.csv", [&](std::ostream& os) {
    ddkf::write_nodes_csv(os, setup.network, setup.tasks);
  });
  ddkf::detail::write_file(dir / "edges_initial.csv", [&](std::ostream& os) {
    ddkf::write_edges_csv(os, setup.network, setup.network);
  });
  std::cout << "nodes " << setup.network.size() << ", edges " << setup.network.edge_count()
            << ", min degree " << setup.network.min_degree() << ", cluster sizes "
            << setup.tasks.cluster_size(1) << '/' << setup.tasks.cluster_size(2) << '\n';
  return kExitOk;
}

int cmd_selftest(bool full, std::size_t jobs) {
  using namespace ddkf::testing;
  std::vector<CheckResult> results;
  auto report = [&](CheckResult r) {
    std::cout << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << ": " << r.detail
              << std::endl;
    results.push_back(std::move(r));
  };
  report(check_oracle_equivalence());
  report(check_batch_equivalence());
  report(check_stochasticity());
  report(check_exact_discretization());
  if (full) {
    ddkf::ExperimentConfig cfg;
    report(check_psd(cfg, jobs));
  }
  for (const auto& r : results)
    if (!r.passed) return kExitNumeric;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion Kalman filtering over clustered sensor networks"};
  app.set_version_flag("--version", std::string(ddkf::kVersion));
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, topo_args;
  auto* run = app.add_subcommand("run", "Monte Carlo run of one policy");
  add_common(run, run_args);

  auto* sweep = app.add_subcommand("sweep", "common-random-number comparison of several policies");
  add_common(sweep, sweep_args);
  std::string policies = "uniform,metropolis,relvar,adaptive";
  sweep->add_option("--policies", policies, "comma-separated policy list")->capture_default_str();

  auto* topo = app.add_subcommand("topology", "generate and export one trial's network and partition");
  add_common(topo, topo_args, false);
  std::size_t topo_trial = 0;
  topo->add_option("--trial", topo_trial, "trial index whose topology is exported")
      ->capture_default_str();

  auto* self = app.add_subcommand("selftest", "oracle-equivalence suite");
  bool full = false;
  std::size_t self_jobs = 1;
  self->add_flag("--full", full, "also run the PSD suite over a default experiment");
  self->add_option("--jobs", self_jobs, "worker threads for --full")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args, policies);
    if (*topo) return cmd_topology(topo_args, topo_trial);
    if (*self) return cmd_selftest(full, self_jobs);
  } catch (const ddkf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const ddkf::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ddkf::TrialError& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return e.numeric() ? kExitNumeric : 1;
  } catch (const ddkf::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ddkf::TopologyError& e) {
    std::cerr << "topology error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
