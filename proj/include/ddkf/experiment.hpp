#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ddkf/combiners.hpp"
#include "ddkf/config.hpp"
#include "ddkf/dynamics.hpp"
#include "ddkf/filter.hpp"
#include "ddkf/metrics.hpp"
#include "ddkf/random.hpp"
#include "ddkf/topology.hpp"

namespace ddkf {

/// A trial failed; carries the trial index.
class TrialError : public std::runtime_error {
 public:
  TrialError(std::size_t trial, const std::string& what, bool numeric)
      : std::runtime_error("trial " + std::to_string(trial) + ": " + what),
        trial_(trial),
        numeric_(numeric) {}
  [[nodiscard]] std::size_t trial() const noexcept { return trial_; }
  [[nodiscard]] bool numeric() const noexcept { return numeric_; }

 private:
  std::size_t trial_;
  bool numeric_;
};

/// Everything drawn for one trial before the filter runs. Depends only on
/// (config, trial index), never on the policy, so policy sweeps share it.
struct TrialSetup {
  std::uint64_t seed = 0;
  Network network;
  ClusterAssignment tasks;
  std::vector<double> sigma2;
  MotionModel model;
  std::vector<TargetState> initial_truths;
};

inline constexpr std::size_t kMaxTopologyRedraws = 100;

[[nodiscard]] inline TrialSetup make_trial_setup(const ExperimentConfig& cfg, std::size_t trial) {
  TrialSetup s;
  s.seed = trial_seed(cfg.seed, trial);
  Rng topo_rng(stream_seed(s.seed, Stream::kTopology));
  const GeometricOptions geo{cfg.n_nodes, cfg.comm_radius, cfg.min_degree, 10'000};
  if (cfg.n_nodes >= 2) {
    Rng part_rng(stream_seed(s.seed, Stream::kPartition));
    const PartitionOptions popt{cfg.resolved_head_radius(), 100 * cfg.n_nodes,
                                cfg.require_connected_clusters};
    // Some topologies admit no valid partition; draw a fresh one.
    for (std::size_t attempt = 0;; ++attempt) {
      s.network = generate_geometric(geo, topo_rng);
      try {
        s.tasks = initial_partition(s.network, popt, part_rng);
        break;
      } catch (const TopologyError&) {
        if (attempt + 1 >= kMaxTopologyRedraws) throw;
      }
    }
  } else {
    s.network = generate_geometric(geo, topo_rng);
    s.tasks.s = 1;
    s.tasks.cluster_of.assign(cfg.n_nodes, 1);
  }
  Rng var_rng(stream_seed(s.seed, Stream::kNoiseVariance));
  s.sigma2.resize(cfg.n_nodes);
  for (double& v : s.sigma2) v = cfg.sigma_min + cfg.sigma_span * var_rng.uniform();
  s.model = projectile_model(cfg.delta, cfg.g, cfg.G_scale, cfg.Q_scale);
  for (double angle : cfg.angles) s.initial_truths.push_back(initial_state(cfg.x0, cfg.y0, cfg.v0, angle));
  return s;
}

struct WeightSnapshot {
  std::size_t iteration = 0;
  Matrix C;
};

/// Per-trial outputs.
struct TrialResult {
  /// errors[j] for iteration j.
  std::vector<ClusterErrors> errors;
  /// truth[j][t] and cluster-mean estimate[j][t] for target t.
  std::vector<std::vector<Vector>> truth;
  std::vector<std::vector<Vector>> cluster_estimate;
  ClusterAssignment tasks;
  ClusterAssignment inferred;
  double recovery = 0.0;
  Network initial_network;
  Network final_network;
  std::vector<WeightSnapshot> weights;
};

struct RunOptions {
  /// Worker threads for trials; output does not depend on it.
  std::size_t jobs = 1;
  /// Record C every k iterations of trial 0 (0 = never).
  std::size_t weights_every = 0;
  /// Called after every engine step. May run concurrently for different trials.
  std::function<void(std::size_t trial, const Engine&)> on_step;
};

[[nodiscard]] inline EngineOptions engine_options(const ExperimentConfig& cfg, Policy policy) {
  EngineOptions o;
  o.policy = policy;
  o.eps = cfg.eps;
  o.filter_knows_gravity = cfg.filter_knows_gravity;
  o.P0_scale = cfg.P0_scale;
  o.pruning_enabled = cfg.pruning_enabled;
  o.prune_tau = cfg.prune_tau;
  o.prune_window = cfg.prune_window;
  o.adapt_gate = cfg.adapt_gate;
  return o;
}

/// Runs one trial of `policy`.
[[nodiscard]] inline TrialResult run_trial(const ExperimentConfig& cfg, Policy policy,
                                           std::size_t trial, const RunOptions& ropt = {}) {
  const TrialSetup setup = make_trial_setup(cfg, trial);
  std::vector<MeasurementModel> sensors;
  sensors.reserve(cfg.n_nodes);
  for (double v : setup.sigma2) sensors.push_back(MeasurementModel::identity(v));

  Engine engine(setup.network, setup.tasks, setup.model, std::move(sensors),
                engine_options(cfg, policy));
  Rng truth_rng(stream_seed(setup.seed, Stream::kTruth));
  Rng meas_rng(stream_seed(setup.seed, Stream::kMeasurement));

  TrialResult out;
  out.tasks = setup.tasks;
  out.initial_network = setup.network;
  out.errors.reserve(cfg.n_iterations);
  std::vector<TargetState> truths = setup.initial_truths;
  std::vector<Matrix> recent_C;
  const std::size_t n = cfg.n_nodes;

  for (std::size_t j = 0; j < cfg.n_iterations; ++j) {
    engine.run_step(truths, meas_rng);
    if (ropt.on_step) ropt.on_step(trial, engine);

    std::vector<Vector> est(n);
    for (std::size_t m = 0; m < n; ++m) est[m] = engine.nodes()[m].x_filt;
    out.errors.push_back(msd_accumulate(truths, est, setup.tasks));

    std::vector<Vector> mean_est(truths.size(), Vector(kStateDim));
    for (std::size_t t = 0; t < truths.size(); ++t) {
      const auto members = setup.tasks.members(t + 1);
      for (std::size_t m : members) mean_est[t] += est[m];
      if (!members.empty()) mean_est[t] *= 1.0 / static_cast<double>(members.size());
    }
    out.truth.push_back(truths);
    out.cluster_estimate.push_back(std::move(mean_est));

    if (trial == 0 && ropt.weights_every > 0 && j % ropt.weights_every == 0) {
      out.weights.push_back({j, engine.C()});
    }
    recent_C.push_back(engine.C());
    if (recent_C.size() > cfg.prune_window) recent_C.erase(recent_C.begin());

    for (auto& x : truths) x = step_truth(x, setup.model, truth_rng);
  }

  // Clusters read off the combination weights averaged over the last window.
  Matrix avg(n, n);
  for (const auto& C : recent_C) avg += C;
  avg *= 1.0 / static_cast<double>(recent_C.size());
  out.inferred = infer_clusters(avg, cfg.prune_tau);
  out.recovery = cluster_recovery_score(out.inferred, setup.tasks);
  out.final_network = engine.network();
  return out;
}

/// Trial-averaged results for one policy.
struct ExperimentResult {
  Policy policy = Policy::kAdaptive;
  std::size_t n_trials = 0;
  /// msd[l] for cluster l (0 = whole network), averaged per node then per trial.
  std::vector<MsdSeries> msd;
  /// Trial-averaged truth and cluster-mean estimate, [iteration][target].
  std::vector<std::vector<Vector>> truth;
  std::vector<std::vector<Vector>> cluster_estimate;
  std::vector<double> recovery;
  /// Trial 0, kept for topology export.
  TrialResult first_trial;
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::size_t error_index = count;
  std::mutex mu;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            // Report the lowest failing index so the error is schedule-independent.
            if (i < error_index) {
              error_index = i;
              error = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentConfig& cfg, Policy policy,
                                                     const RunOptions& ropt = {}) {
  validate(cfg);
  std::vector<TrialResult> trials(cfg.n_trials);
  detail::parallel_for(cfg.n_trials, ropt.jobs, [&](std::size_t t) {
    try {
      trials[t] = run_trial(cfg, policy, t, ropt);
    } catch (const NumericError& e) {
      throw TrialError(t, e.what(), true);
    } catch (const std::exception& e) {
      throw TrialError(t, e.what(), false);
    }
  });

  ExperimentResult r;
  r.policy = policy;
  r.n_trials = cfg.n_trials;
  const std::size_t clusters = trials.front().tasks.s;
  const std::size_t iters = cfg.n_iterations;
  const double inv_trials = 1.0 / static_cast<double>(cfg.n_trials);
  r.msd.assign(clusters + 1, MsdSeries{std::vector<double>(iters, 0.0), cfg.n_trials});
  std::vector<double> per_trial(cfg.n_trials);
  for (std::size_t l = 0; l <= clusters; ++l) {
    for (std::size_t j = 0; j < iters; ++j) {
      for (std::size_t t = 0; t < cfg.n_trials; ++t) per_trial[t] = trials[t].errors[j].mean(l);
      r.msd[l].linear[j] = pairwise_sum(per_trial) * inv_trials;
    }
  }
  const std::size_t targets = cfg.angles.size();
  r.truth.assign(iters, std::vector<Vector>(targets, Vector(kStateDim)));
  r.cluster_estimate = r.truth;
  for (std::size_t j = 0; j < iters; ++j) {
    for (std::size_t k = 0; k < targets; ++k) {
      for (std::size_t c = 0; c < kStateDim; ++c) {
        for (std::size_t t = 0; t < cfg.n_trials; ++t) per_trial[t] = trials[t].truth[j][k][c];
        r.truth[j][k][c] = pairwise_sum(per_trial) * inv_trials;
        for (std::size_t t = 0; t < cfg.n_trials; ++t)
          per_trial[t] = trials[t].cluster_estimate[j][k][c];
        r.cluster_estimate[j][k][c] = pairwise_sum(per_trial) * inv_trials;
      }
    }
  }
  for (const auto& t : trials) r.recovery.push_back(t.recovery);
  r.first_trial = std::move(trials.front());
  return r;
}

/// One run per policy with common random numbers: every policy sees the
/// same topologies, noise variances, truth paths and measurement noise.
[[nodiscard]] inline std::vector<ExperimentResult> policy_sweep(const ExperimentConfig& cfg,
                                                                const std::vector<Policy>& policies,
                                                                const RunOptions& ropt = {}) {
  if (policies.empty()) throw std::invalid_argument("policy_sweep: no policies given");
  std::vector<ExperimentResult> out;
  for (Policy p : policies) out.push_back(run_experiment(cfg, p, ropt));
  return out;
}

}  // namespace ddkf
