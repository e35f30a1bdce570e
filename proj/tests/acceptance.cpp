// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Usage: ddkf_acceptance [scratch-dir]

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "ddkf/config.hpp"
#include "ddkf/experiment.hpp"
#include "ddkf/testing/checks.hpp"

using namespace ddkf;
using namespace ddkf::testing;

int main(int argc, char** argv) {
  const std::filesystem::path scratch =
      argc > 1 ? std::filesystem::path(argv[1])
               : std::filesystem::temp_directory_path() / "ddkf_acceptance";
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  const ExperimentConfig defaults;

  int failures = 0;
  auto report = [&](const CheckResult& r, double seconds) {
    std::cout << (r.passed ? "PASS" : "FAIL") << "  criterion " << r.id << "  " << r.name << "  -- "
              << r.detail << " [" << fmt(seconds) << " s]" << std::endl;
    if (!r.passed) ++failures;
  };
  auto timed = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r = fn();
    report(r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };

  try {
    timed([] { return check_oracle_equivalence(); });
    timed([] { return check_batch_equivalence(); });
    timed([] { return check_stochasticity(); });
    timed([&] { return check_psd(defaults, jobs); });
    timed([&] { return check_cluster_recovery(defaults); });

    RunOptions ropt;
    ropt.jobs = jobs;
    const auto t0 = std::chrono::steady_clock::now();
    const auto sweep = policy_sweep(
        defaults, {Policy::kUniform, Policy::kMetropolis, Policy::kRelativeVariance, Policy::kAdaptive},
        ropt);
    const double sweep_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(check_policy_ordering(sweep), sweep_s);
    report(check_convergence(sweep.back()), 0.0);

    timed([] { return check_exact_discretization(); });
    timed([&] { return check_determinism(defaults, scratch); });
  } catch (const std::exception& e) {
    std::cout << "FAIL  aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : std::to_string(failures) + " CRITERIA FAILED")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
