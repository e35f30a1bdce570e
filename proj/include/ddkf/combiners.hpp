#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ddkf/numerics.hpp"
#include "ddkf/topology.hpp"

namespace ddkf {

/// Combination-weight policy.
enum class Policy { kUniform, kMetropolis, kRelativeVariance, kAdaptive };

[[nodiscard]] inline std::string_view policy_name(Policy p) noexcept {
  switch (p) {
    case Policy::kUniform: return "uniform";
    case Policy::kMetropolis: return "metropolis";
    case Policy::kRelativeVariance: return "relvar";
    case Policy::kAdaptive: return "adaptive";
  }
  return "unknown";
}

[[nodiscard]] inline std::optional<Policy> parse_policy(std::string_view s) noexcept {
  for (Policy p : {Policy::kUniform, Policy::kMetropolis, Policy::kRelativeVariance,
                   Policy::kAdaptive})
    if (policy_name(p) == s) return p;
  return std::nullopt;
}

inline constexpr double kStochasticityTolerance = 1e-12;

/// Left-stochastic N x N matrix: entry (n, m) is the weight node m gives to
/// neighbor n's estimate, so every column sums to one.
using CombinationMatrix = Matrix;

/// A = C^T.
using DiffusionMatrix = Matrix;

[[nodiscard]] inline CombinationMatrix uniform_weights(const Network& net) {
  const std::size_t n = net.size();
  CombinationMatrix C(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto& nb = net.neighborhood(m);
    const double w = 1.0 / static_cast<double>(nb.size());
    for (std::size_t k : nb) C(k, m) = w;
  }
  return C;
}

[[nodiscard]] inline CombinationMatrix metropolis_weights(const Network& net) {
  const std::size_t n = net.size();
  CombinationMatrix C(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    double off = 0.0;
    for (std::size_t k : net.neighborhood(m)) {
      if (k == m) continue;
      const double w =
          1.0 / static_cast<double>(std::max(net.neighborhood(k).size(), net.neighborhood(m).size()));
      C(k, m) = w;
      off += w;
    }
    C(m, m) = 1.0 - off;
  }
  return C;
}

/// c_nm = sigma_n^-2 / sum_{l in N_m} sigma_l^-2 over the neighborhood.
[[nodiscard]] inline CombinationMatrix relative_variance_weights(const Network& net,
                                                                 std::span<const double> sigma2) {
  const std::size_t n = net.size();
  if (sigma2.size() != n) {
    throw std::invalid_argument("relative_variance_weights: need one variance per node");
  }
  for (std::size_t m = 0; m < n; ++m)
    if (!(sigma2[m] > 0.0)) {
      throw std::invalid_argument("relative_variance_weights: variance of node " +
                                  std::to_string(m) + " is not positive");
    }
  CombinationMatrix C(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    double total = 0.0;
    for (std::size_t k : net.neighborhood(m)) total += 1.0 / sigma2[k];
    for (std::size_t k : net.neighborhood(m)) C(k, m) = (1.0 / sigma2[k]) / total;
  }
  return C;
}

/// Adaptive weights for node m's column. `psi` holds every node's
/// intermediate estimate; `residual` is node m's state-space residual. For
/// each n in `neighborhood` the distance d_n = max(|psi_m + residual - psi_n|, eps)
/// gives c_nm = d_n^-2 / sum_l d_l^-2. Returned in neighborhood order.
[[nodiscard]] inline std::vector<double> adaptive_weight_row(std::size_t m,
                                                             std::span<const Vector> psi,
                                                             const Vector& residual,
                                                             std::span<const std::size_t> neighborhood,
                                                             double eps) {
  Vector anchor = psi[m];
  anchor += residual;
  std::vector<double> inv_sq(neighborhood.size());
  double total = 0.0;
  for (std::size_t i = 0; i < neighborhood.size(); ++i) {
    const double d = std::max((anchor - psi[neighborhood[i]]).norm(), eps);
    inv_sq[i] = 1.0 / (d * d);
    total += inv_sq[i];
  }
  for (double& w : inv_sq) w /= total;
  return inv_sq;
}

[[nodiscard]] inline DiffusionMatrix diffusion_matrix(const CombinationMatrix& C) {
  return transpose(C);
}

/// Describes the first violated CombinationMatrix invariant, or nullopt.
[[nodiscard]] inline std::optional<std::string> check_combination_matrix(
    const CombinationMatrix& C, const Network& net, double tol = kStochasticityTolerance) {
  const std::size_t n = net.size();
  if (C.rows() != n || C.cols() != n) return "shape does not match network";
  for (std::size_t m = 0; m < n; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = C(k, m);
      if (!std::isfinite(w)) return "non-finite weight at (" + std::to_string(k) + "," + std::to_string(m) + ")";
      if (w < 0.0) return "negative weight at (" + std::to_string(k) + "," + std::to_string(m) + ")";
      if (w != 0.0 && k != m && !net.adjacent(k, m)) {
        return "weight outside neighborhood at (" + std::to_string(k) + "," + std::to_string(m) + ")";
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > tol) {
      return "column " + std::to_string(m) + " sums to " + std::to_string(sum);
    }
  }
  return std::nullopt;
}

}  // namespace ddkf
