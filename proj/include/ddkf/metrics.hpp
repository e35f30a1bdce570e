#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ddkf/dynamics.hpp"
#include "ddkf/topology.hpp"

namespace ddkf {

inline constexpr double kDbFloor = 1e-30;

[[nodiscard]] inline double to_db(double linear) noexcept {
  return 10.0 * std::log10(std::max(linear, kDbFloor));
}

/// Per-cluster squared-error sums and node counts for one iteration.
/// Index 0 is the whole network, index l the cluster labelled l.
struct ClusterErrors {
  std::vector<double> sum_sq;
  std::vector<std::size_t> count;

  [[nodiscard]] double mean(std::size_t cluster) const {
    return count[cluster] == 0 ? 0.0 : sum_sq[cluster] / static_cast<double>(count[cluster]);
  }
};

/// sum over m in C_l of |x_{C_l} - xhat_m|^2, for every cluster and for the
/// whole network. truths[l-1] is the target tracked by cluster l.
[[nodiscard]] inline ClusterErrors msd_accumulate(std::span<const TargetState> truths,
                                                  std::span<const Vector> estimates,
                                                  const ClusterAssignment& clusters) {
  if (estimates.size() != clusters.cluster_of.size()) {
    throw std::invalid_argument("msd_accumulate: estimate count != node count");
  }
  ClusterErrors out{std::vector<double>(clusters.s + 1, 0.0),
                    std::vector<std::size_t>(clusters.s + 1, 0)};
  for (std::size_t m = 0; m < estimates.size(); ++m) {
    const std::size_t l = clusters.cluster_of[m];
    if (l == 0 || l > truths.size()) {
      throw std::invalid_argument("msd_accumulate: node cluster has no target");
    }
    const double e = (truths[l - 1] - estimates[m]).squared_norm();
    out.sum_sq[l] += e;
    out.count[l] += 1;
    out.sum_sq[0] += e;
    out.count[0] += 1;
  }
  return out;
}

/// Pairwise (tree) summation; the result depends only on the order of
/// `values`, not on how they were produced.
[[nodiscard]] inline double pairwise_sum(std::span<const double> values) noexcept {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Mean squared deviation over iterations for one cluster.
struct MsdSeries {
  std::vector<double> linear;
  std::size_t n_trials = 0;

  [[nodiscard]] std::vector<double> db() const {
    std::vector<double> out(linear.size());
    std::transform(linear.begin(), linear.end(), out.begin(), to_db);
    return out;
  }
};

/// Mean over the final 20% of entries (at least one).
[[nodiscard]] inline double steady_state_level(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("steady_state_level: empty series");
  const std::size_t tail = std::max<std::size_t>(1, values.size() / 5);
  const auto last = values.subspan(values.size() - tail);
  return pairwise_sum(last) / static_cast<double>(tail);
}

/// First iteration from which the dB series stays within +-band_db of its
/// steady-state level (mean over the final 20%); nullopt if it never settles.
[[nodiscard]] inline std::optional<std::size_t> convergence_iteration(
    std::span<const double> series_db, double band_db) {
  if (series_db.size() < 10) {
    throw std::invalid_argument("convergence_iteration: need at least 10 iterations");
  }
  const double level = steady_state_level(series_db);
  std::optional<std::size_t> first;
  for (std::size_t j = series_db.size(); j-- > 0;) {
    if (std::abs(series_db[j] - level) > band_db) break;
    first = j;
  }
  // A series that only lands in the band at its last sample has not settled.
  if (first && *first + 1 >= series_db.size()) return std::nullopt;
  return first;
}

/// Best agreement between two labellings over one-to-one label matchings.
/// Unmatched labels count as disagreement.
[[nodiscard]] inline double cluster_recovery_score(const ClusterAssignment& inferred,
                                                   const ClusterAssignment& truth) {
  const std::size_t n = truth.cluster_of.size();
  if (inferred.cluster_of.size() != n) {
    throw std::invalid_argument("cluster_recovery_score: node counts differ");
  }
  if (n == 0) return 1.0;
  const std::size_t a = inferred.s;
  const std::size_t b = truth.s;
  // overlap[i][j] = #nodes with inferred label i+1 and true label j+1
  std::vector<std::vector<std::size_t>> overlap(a, std::vector<std::size_t>(b, 0));
  for (std::size_t m = 0; m < n; ++m) overlap[inferred.cluster_of[m] - 1][truth.cluster_of[m] - 1]++;

  // Exact maximum-weight matching by DP over subsets of the smaller side.
  const bool rows_small = a <= b;
  const std::size_t small = rows_small ? a : b;
  const std::size_t large = rows_small ? b : a;
  if (small > 20) throw std::invalid_argument("cluster_recovery_score: too many clusters");
  auto weight = [&](std::size_t s_idx, std::size_t l_idx) {
    return rows_small ? overlap[s_idx][l_idx] : overlap[l_idx][s_idx];
  };
  // best[mask] after processing some prefix of the large side
  std::vector<long long> best(std::size_t{1} << small, -1);
  best[0] = 0;
  for (std::size_t l = 0; l < large; ++l) {
    auto next = best;
    for (std::size_t mask = 0; mask < best.size(); ++mask) {
      if (best[mask] < 0) continue;
      for (std::size_t s = 0; s < small; ++s) {
        if (mask & (std::size_t{1} << s)) continue;
        const std::size_t nm = mask | (std::size_t{1} << s);
        next[nm] = std::max(next[nm], best[mask] + static_cast<long long>(weight(s, l)));
      }
    }
    best = std::move(next);
  }
  const long long matched = *std::max_element(best.begin(), best.end());
  return static_cast<double>(matched) / static_cast<double>(n);
}

}  // namespace ddkf
