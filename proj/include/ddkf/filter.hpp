#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddkf/combiners.hpp"
#include "ddkf/dynamics.hpp"
#include "ddkf/numerics.hpp"
#include "ddkf/random.hpp"
#include "ddkf/topology.hpp"

namespace ddkf {

/// Invalid engine setup (shape mismatch, unsupported observation model).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NodeFilterState {
  Vector x_pred;   // x_{m,j|j-1}
  Matrix P_pred;   // P_{m,j|j-1}
  Vector psi;      // intermediate estimate after adaptation
  Matrix P_psi;    // its covariance
  Vector q;        // y_m - H_m psi_m
  Vector x_filt;   // x_{m,j|j} after combination
};

/// One neighbor's contribution to the adaptation step.
struct SensorMessage {
  const Vector* y;
  const Matrix* H;
  const Matrix* R;
};

/// Sequential Kalman measurement updates, one message at a time in the given
/// order, starting from (x, P). P is re-symmetrized after every update.
[[nodiscard]] inline std::pair<Vector, Matrix> adapt(const Vector& x, const Matrix& P,
                                                     std::span<const SensorMessage> msgs) {
  Vector psi = x;
  Matrix Pp = P;
  for (const SensorMessage& msg : msgs) {
    const Matrix& H = *msg.H;
    const Matrix PHt = mat_mul(Pp, transpose(H));
    Matrix Re = *msg.R;
    Re += mat_mul(H, PHt);
    const Matrix Re_inv = inverse_spd(symmetrize(Re), "innovation covariance R_e");
    const Matrix K = mat_mul(PHt, Re_inv);
    const Vector innovation = *msg.y - mat_vec(H, psi);
    psi += mat_vec(K, innovation);
    Pp -= mat_mul(K, transpose(PHt));
    Pp = symmetrize(Pp);
  }
  return {std::move(psi), std::move(Pp)};
}

[[nodiscard]] inline Vector residual(const Vector& y, const Matrix& H, const Vector& psi) {
  return y - mat_vec(H, psi);
}

/// Convex combination sum_n weights[i] * psi[neighborhood[i]].
[[nodiscard]] inline Vector combine(std::span<const Vector> psi,
                                    std::span<const std::size_t> neighborhood,
                                    std::span<const double> weights) {
  if (weights.size() != neighborhood.size()) {
    throw NumericError("combine: weight count does not match neighborhood size");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw NumericError("combine: invalid weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw NumericError("combine: weights sum to " + std::to_string(sum) + ", not 1");
  }
  Vector out(psi[neighborhood.front()].dim());
  for (std::size_t i = 0; i < neighborhood.size(); ++i) {
    const Vector& p = psi[neighborhood[i]];
    for (std::size_t k = 0; k < out.dim(); ++k) out[k] += weights[i] * p[k];
  }
  return out;
}

/// x' = F x (+ u_g), P' = F P F^T + G Q G^T.
[[nodiscard]] inline std::pair<Vector, Matrix> time_update(const Vector& x, const Matrix& P,
                                                           const MotionModel& model,
                                                           bool add_known_input) {
  Vector xn = mat_vec(model.F, x);
  if (add_known_input) xn += model.u_g;
  Matrix Pn = mat_mul(mat_mul(model.F, P), transpose(model.F));
  Pn += mat_mul(mat_mul(model.G, model.Q), transpose(model.G));
  return {std::move(xn), symmetrize(Pn)};
}

struct EngineOptions {
  Policy policy = Policy::kAdaptive;
  double eps = 1e-12;
  bool filter_knows_gravity = true;
  double P0_scale = 1.0;
  /// Node m uses neighbor n's measurement only when a_nm >= adapt_gate.
  /// Zero disables gating.
  double adapt_gate = 0.0;
  bool pruning_enabled = true;
  double prune_tau = 0.05;
  std::size_t prune_window = 10;
};

/// Synchronous ATC diffusion Kalman filter over a sensor network. Each node
/// observes the target of its ground-truth cluster.
class Engine {
 public:
  Engine(Network net, ClusterAssignment tasks, MotionModel model,
         std::vector<MeasurementModel> sensors, EngineOptions opt)
      : net_(std::move(net)),
        tasks_(std::move(tasks)),
        model_(std::move(model)),
        sensors_(std::move(sensors)),
        opt_(opt) {
    const std::size_t n = net_.size();
    if (tasks_.cluster_of.size() != n) throw ConfigurationError("cluster assignment size != node count");
    if (sensors_.size() != n) throw ConfigurationError("need one measurement model per node");
    if (opt_.prune_window < 1) throw ConfigurationError("prune_window must be at least 1");
    residual_map_.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
      const Matrix& H = sensors_[m].H;
      if (H.cols() != kStateDim) throw ConfigurationError("observation matrix must have 4 columns");
      if (opt_.policy != Policy::kAdaptive) continue;
      if (!H.is_square()) {
        throw ConfigurationError(
            "adaptive weights need a square observation matrix to map residuals into state space");
      }
      if (H != Matrix::identity(kStateDim)) residual_map_[m] = inverse(H, "observation matrix H");
    }
    nodes_.resize(n);
    for (auto& s : nodes_) {
      s.x_pred = Vector(kStateDim);
      s.P_pred = Matrix::scaled_identity(kStateDim, opt_.P0_scale);
      s.psi = s.x_pred;
      s.P_psi = s.P_pred;
      s.q = Vector(kStateDim);
      s.x_filt = s.x_pred;
    }
    reset_weights();
  }

  [[nodiscard]] const Network& network() const noexcept { return net_; }
  [[nodiscard]] const ClusterAssignment& tasks() const noexcept { return tasks_; }
  [[nodiscard]] const std::vector<NodeFilterState>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const CombinationMatrix& C() const noexcept { return C_; }
  [[nodiscard]] const DiffusionMatrix& A() const noexcept { return A_; }
  [[nodiscard]] const EngineOptions& options() const noexcept { return opt_; }
  [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }
  [[nodiscard]] const std::vector<Vector>& last_measurements() const noexcept { return y_; }

  /// Draws every node's measurement of its assigned target (ascending node
  /// order), then runs one iteration.
  void run_step(std::span<const TargetState> truths, Rng& rng) {
    std::vector<Vector> y(net_.size());
    for (std::size_t m = 0; m < net_.size(); ++m) {
      const std::size_t target = tasks_.cluster_of[m] - 1;
      if (target >= truths.size()) throw ConfigurationError("node assigned to a missing target");
      y[m] = measure(truths[target], sensors_[m], rng);
    }
    step(std::move(y));
  }

  /// One synchronous iteration on the given measurements.
  void step(std::vector<Vector> y) {
    const std::size_t n = net_.size();
    if (y.size() != n) throw ConfigurationError("need one measurement per node");
    y_ = std::move(y);

    // Adaptation. Reads only this iteration's measurements and the previous A.
    for (std::size_t m = 0; m < n; ++m) {
      std::vector<SensorMessage> msgs;
      for (std::size_t k : net_.neighborhood(m)) {
        if (opt_.adapt_gate > 0.0 && A_(k, m) < opt_.adapt_gate) continue;
        msgs.push_back({&y_[k], &sensors_[k].H, &sensors_[k].R});
      }
      auto [psi, P] = adapt(nodes_[m].x_pred, nodes_[m].P_pred, msgs);
      nodes_[m].psi = std::move(psi);
      nodes_[m].P_psi = std::move(P);
    }
    for (std::size_t m = 0; m < n; ++m)
      nodes_[m].q = residual(y_[m], sensors_[m].H, nodes_[m].psi);

    std::vector<Vector> psi(n);
    for (std::size_t m = 0; m < n; ++m) psi[m] = nodes_[m].psi;

    if (opt_.policy == Policy::kAdaptive) {
      CombinationMatrix C(n, n);
      for (std::size_t m = 0; m < n; ++m) {
        const Vector r = residual_map_[m] ? mat_vec(*residual_map_[m], nodes_[m].q) : nodes_[m].q;
        const auto& nb = net_.neighborhood(m);
        const auto row = adaptive_weight_row(m, psi, r, nb, opt_.eps);
        for (std::size_t i = 0; i < nb.size(); ++i) C(nb[i], m) = row[i];
      }
      C_ = std::move(C);
      A_ = diffusion_matrix(C_);
    }

    for (std::size_t m = 0; m < n; ++m) {
      const auto& nb = net_.neighborhood(m);
      std::vector<double> w(nb.size());
      for (std::size_t i = 0; i < nb.size(); ++i) w[i] = C_(nb[i], m);
      nodes_[m].x_filt = combine(psi, nb, w);
    }

    if (opt_.pruning_enabled) update_pruning();

    for (auto& s : nodes_) {
      auto [x, P] = time_update(s.x_filt, s.P_psi, model_, opt_.filter_knows_gravity);
      s.x_pred = std::move(x);
      s.P_pred = std::move(P);
    }
    ++iteration_;
  }

 private:
  void reset_weights() {
    switch (opt_.policy) {
      case Policy::kUniform: C_ = uniform_weights(net_); break;
      case Policy::kMetropolis: C_ = metropolis_weights(net_); break;
      case Policy::kRelativeVariance: {
        std::vector<double> s2(sensors_.size());
        for (std::size_t m = 0; m < sensors_.size(); ++m) s2[m] = sensors_[m].sigma2;
        C_ = relative_variance_weights(net_, s2);
        break;
      }
      case Policy::kAdaptive:
        if (C_.rows() == 0) C_ = Matrix::identity(net_.size());
        break;
    }
    A_ = diffusion_matrix(C_);
  }

  void update_pruning() {
    history_.push_back(C_);
    while (history_.size() > opt_.prune_window) history_.pop_front();
    if (history_.size() < opt_.prune_window) return;
    const std::vector<Matrix> window(history_.begin(), history_.end());
    Network pruned = prune_cross_links(net_, window, opt_.prune_tau, opt_.prune_window);
    if (pruned.edge_count() == net_.edge_count()) return;
    net_ = std::move(pruned);
    if (opt_.policy != Policy::kAdaptive) {
      reset_weights();
      return;
    }
    // Drop weight on removed links so C stays supported on the live adjacency.
    const std::size_t n = net_.size();
    for (std::size_t m = 0; m < n; ++m) {
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != m && !net_.adjacent(k, m)) C_(k, m) = 0.0;
        total += C_(k, m);
      }
      for (std::size_t k = 0; k < n; ++k) C_(k, m) /= total;
    }
    A_ = diffusion_matrix(C_);
  }

  Network net_;
  ClusterAssignment tasks_;
  MotionModel model_;
  std::vector<MeasurementModel> sensors_;
  EngineOptions opt_;
  std::vector<std::optional<Matrix>> residual_map_;
  std::vector<NodeFilterState> nodes_;
  std::vector<Vector> y_;
  CombinationMatrix C_;
  DiffusionMatrix A_;
  std::deque<Matrix> history_;
  std::size_t iteration_ = 0;
};

}  // namespace ddkf
