#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddkf/config.hpp"
#include "ddkf/experiment.hpp"
#include "ddkf/outputs.hpp"
#include "ddkf/testing/checks.hpp"
#include "ddkf/testing/oracles.hpp"

using namespace ddkf;
namespace oracle = ddkf::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "ddkf_harness_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n_trials = 6;
  cfg.n_iterations = 30;
  cfg.seed = 4242;
  return cfg;
}

std::string csv_of(const std::vector<ExperimentResult>& results) {
  std::vector<MetricsRecord> records;
  for (const auto& r : results) {
    auto rec = make_records(r);
    records.insert(records.end(), rec.begin(), rec.end());
  }
  std::ostringstream os;
  write_msd_csv(os, records);
  return os.str();
}

ConfigError::Kind parse_error_kind(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected ConfigError for: " << text;
  return ConfigError::Kind::kParse;
}

}  // namespace

TEST(Config, EmptyDocumentGivesShippedScenario) {
  const ExperimentConfig cfg = parse_config("");
  EXPECT_EQ(cfg.n_nodes, 30u);
  EXPECT_EQ(cfg.n_trials, 200u);
  EXPECT_EQ(cfg.n_iterations, 100u);
  EXPECT_EQ(cfg.x0, 1.0);
  EXPECT_EQ(cfg.y0, 30.0);
  EXPECT_EQ(cfg.v0, 15.0);
  EXPECT_EQ(cfg.G_scale, 0.625);
  EXPECT_EQ(cfg.Q_scale, 0.001);
  EXPECT_EQ(cfg.sigma_min, 0.01);
  EXPECT_EQ(cfg.sigma_span, 0.5);
  EXPECT_EQ(cfg.policy, Policy::kAdaptive);
  ASSERT_EQ(cfg.angles.size(), 2u);
}

TEST(Config, ShippedConfigFileMatchesDefaults) {
  const ExperimentConfig cfg = load_config(fs::path(DDKF_SOURCE_DIR) / "configs" / "default.cfg");
  EXPECT_EQ(config_to_json(cfg), config_to_json(ExperimentConfig{}));
}

TEST(Config, KeyValueDocumentWithComments) {
  const ExperimentConfig cfg = parse_config(
      "# small run\n"
      "n_trials = 12   # trials\n"
      "policy = metropolis\n"
      "angles = 1.0, 0.5\n"
      "pruning_enabled = false\n");
  EXPECT_EQ(cfg.n_trials, 12u);
  EXPECT_EQ(cfg.policy, Policy::kMetropolis);
  EXPECT_EQ(cfg.angles, (std::vector<double>{1.0, 0.5}));
  EXPECT_FALSE(cfg.pruning_enabled);
}

TEST(Config, ErrorKindsAreDistinct) {
  EXPECT_EQ(parse_error_kind("n_trials = 0\n"), ConfigError::Kind::kInvariant);
  EXPECT_EQ(parse_error_kind("n_trials = many\n"), ConfigError::Kind::kParse);
  EXPECT_EQ(parse_error_kind("just some words\n"), ConfigError::Kind::kParse);
  EXPECT_EQ(parse_error_kind("{ not json"), ConfigError::Kind::kParse);
  try {
    (void)parse_config("n_trails = 5\n");
    FAIL() << "expected unknown-key error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::kUnknownKey);
    EXPECT_NE(std::string(e.what()).find("n_trails"), std::string::npos);
  }
  try {
    (void)load_config("/nonexistent/ddkf.cfg");
    FAIL() << "expected missing-file error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::kMissingFile);
  }
  std::vector<int> codes;
  for (auto k : {ConfigError::Kind::kMissingFile, ConfigError::Kind::kParse,
                 ConfigError::Kind::kUnknownKey, ConfigError::Kind::kInvariant})
    codes.push_back(ConfigError(k, "").exit_code());
  std::sort(codes.begin(), codes.end());
  EXPECT_EQ(std::adjacent_find(codes.begin(), codes.end()), codes.end());
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg = small_config();
  cfg.policy = Policy::kRelativeVariance;
  cfg.angles = {0.9, 0.4};
  const ExperimentConfig back = parse_config(config_to_json(cfg).dump());
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}

TEST(TrialSeeds, AddingTrialsKeepsEarlierStreams) {
  ExperimentConfig a = small_config();
  ExperimentConfig b = a;
  b.n_trials = 20;
  for (std::size_t t = 0; t < a.n_trials; ++t) {
    const TrialSetup sa = make_trial_setup(a, t);
    const TrialSetup sb = make_trial_setup(b, t);
    EXPECT_EQ(sa.seed, sb.seed);
    EXPECT_EQ(sa.sigma2, sb.sigma2);
    EXPECT_EQ(sa.tasks.cluster_of, sb.tasks.cluster_of);
  }
}

TEST(TrialSetup, PolicyIndependentAndWithinVarianceRange) {
  const ExperimentConfig cfg = small_config();
  const TrialSetup s = make_trial_setup(cfg, 3);
  for (double v : s.sigma2) {
    EXPECT_GE(v, cfg.sigma_min);
    EXPECT_LT(v, cfg.sigma_min + cfg.sigma_span);
  }
  EXPECT_TRUE(s.network.connected());
  EXPECT_GE(s.network.min_degree(), cfg.min_degree);
  EXPECT_TRUE(clusters_connected(s.network, s.tasks));
}

TEST(MsdCsv, ZeroRecordsIsHeaderOnly) {
  std::ostringstream os;
  write_msd_csv(os, {});
  EXPECT_EQ(os.str(), std::string(kMsdHeader) + "\n");
}

TEST(MsdCsv, RoundTripIsExact) {
  const auto results = policy_sweep(small_config(), {Policy::kUniform, Policy::kAdaptive});
  std::vector<MetricsRecord> records;
  for (const auto& r : results) {
    auto rec = make_records(r);
    records.insert(records.end(), rec.begin(), rec.end());
  }
  std::ostringstream os;
  write_msd_csv(os, records);
  std::istringstream is(os.str());
  EXPECT_EQ(parse_msd_csv(is), records);
}

TEST(Sweep, SinglePolicySweepEqualsRun) {
  const ExperimentConfig cfg = small_config();
  const auto sweep = policy_sweep(cfg, {Policy::kUniform});
  const auto single = run_experiment(cfg, Policy::kUniform);
  EXPECT_EQ(csv_of(sweep), csv_of({single}));
}

TEST(Sweep, PoliciesShareRandomNumbers) {
  ExperimentConfig cfg = small_config();
  const auto sweep = policy_sweep(cfg, {Policy::kUniform, Policy::kMetropolis, Policy::kAdaptive});
  for (const auto& r : sweep) {
    EXPECT_EQ(r.first_trial.tasks.cluster_of, sweep[0].first_trial.tasks.cluster_of);
    for (std::size_t j = 0; j < cfg.n_iterations; ++j)
      for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(r.truth[j][t], sweep[0].truth[j][t]);
  }
}

TEST(Sweep, ParallelismDoesNotChangeOutput) {
  const ExperimentConfig cfg = small_config();
  RunOptions serial, parallel;
  parallel.jobs = 4;
  EXPECT_EQ(csv_of({run_experiment(cfg, Policy::kAdaptive, serial)}),
            csv_of({run_experiment(cfg, Policy::kAdaptive, parallel)}));
}

TEST(Outputs, RunMetaReproducesRunByteForByte) {
  const ExperimentConfig cfg = small_config();
  const fs::path first = scratch("meta_first");
  const fs::path second = scratch("meta_second");
  write_outputs(first, cfg, {run_experiment(cfg, cfg.policy)});
  const ExperimentConfig reread = load_config(first / "run_meta.json");
  write_outputs(second, reread, {run_experiment(reread, reread.policy)});
  for (const char* name : {"msd.csv", "trajectory.csv", "run_meta.json", "summary.json",
                           "topology_initial.csv", "topology_final.csv", "edges_final.csv"}) {
    EXPECT_EQ(oracle::detail::slurp(first / name), oracle::detail::slurp(second / name)) << name;
  }
}

TEST(Outputs, ExpectedFilesAndHeaders) {
  const ExperimentConfig cfg = small_config();
  const fs::path dir = scratch("files");
  RunOptions ropt;
  ropt.weights_every = 5;
  write_outputs(dir, cfg, policy_sweep(cfg, {Policy::kUniform, Policy::kAdaptive}, ropt));
  auto first_line = [&](const char* name) {
    std::ifstream in(dir / name);
    std::string line;
    std::getline(in, line);
    return line;
  };
  EXPECT_EQ(first_line("msd.csv"), kMsdHeader);
  EXPECT_EQ(first_line("trajectory.csv"), "iteration,target_id,policy,x,y,x_hat,y_hat");
  EXPECT_EQ(first_line("topology_initial.csv"), "node_id,x,y,cluster");
  EXPECT_EQ(first_line("edges_final_adaptive.csv"), "node_a,node_b,alive");
  EXPECT_EQ(first_line("weights_adaptive.csv"), "iteration,n,m,weight");
  EXPECT_TRUE(fs::exists(dir / "topology_final_uniform.csv"));
}

TEST(Outputs, UnwritableDirectoryIsAnIoError) {
  const fs::path dir = scratch("blocked");
  std::ofstream(dir / "file") << "x";
  const ExperimentConfig cfg = small_config();
  EXPECT_THROW(write_outputs(dir / "file" / "sub", cfg, {}), IoError);
}

TEST(Experiment, SingleNodeMsdEqualsOracleTrace) {
  ExperimentConfig cfg = small_config();
  cfg.n_nodes = 1;
  cfg.min_degree = 0;
  cfg.n_trials = 3;
  cfg.policy = Policy::kUniform;
  const ExperimentResult r = run_experiment(cfg, Policy::kUniform);

  // Rebuild each trial's measurement stream and truth independently, then
  // filter with the textbook recursion.
  std::vector<double> expected(cfg.n_iterations, 0.0);
  for (std::size_t t = 0; t < cfg.n_trials; ++t) {
    const TrialSetup s = make_trial_setup(cfg, t);
    Rng truth_rng(stream_seed(s.seed, Stream::kTruth));
    Rng meas_rng(stream_seed(s.seed, Stream::kMeasurement));
    const MeasurementModel sensor = MeasurementModel::identity(s.sigma2[0]);
    std::vector<TargetState> truths = s.initial_truths;
    std::vector<oracle::EVec> ys;
    std::vector<TargetState> path;
    for (std::size_t j = 0; j < cfg.n_iterations; ++j) {
      ys.push_back(oracle::to_eigen(measure(truths[0], sensor, meas_rng)));
      path.push_back(truths[0]);
      for (auto& x : truths) x = step_truth(x, s.model, truth_rng);
    }
    const auto kf = oracle::textbook_kf(oracle::EVec::Zero(4), oracle::EMat::Identity(4, 4),
                                         oracle::to_eigen(s.model.F), oracle::to_eigen(s.model.u_g),
                                         oracle::to_eigen(s.model.injected_covariance()),
                                         oracle::to_eigen(sensor.H), oracle::to_eigen(sensor.R), ys);
    for (std::size_t j = 0; j < cfg.n_iterations; ++j)
      expected[j] += (kf[j].x_filt - oracle::to_eigen(path[j])).squaredNorm() / cfg.n_trials;
  }
  ASSERT_EQ(r.msd.size(), 2u);
  for (std::size_t j = 0; j < cfg.n_iterations; ++j) {
    EXPECT_NEAR(r.msd[1].linear[j], expected[j], 1e-10 * std::max(1.0, expected[j])) << j;
    EXPECT_EQ(r.msd[0].linear[j], r.msd[1].linear[j]);
  }
}

TEST(Experiment, FailedTrialReportsItsIndex) {
  ExperimentConfig cfg = small_config();
  cfg.comm_radius = 0.01;  // no connected network exists at this radius
  try {
    (void)run_experiment(cfg, Policy::kUniform);
    FAIL() << "expected TrialError";
  } catch (const TrialError& e) {
    EXPECT_EQ(e.trial(), 0u);
    EXPECT_NE(std::string(e.what()).find("trial 0"), std::string::npos);
  }
}
