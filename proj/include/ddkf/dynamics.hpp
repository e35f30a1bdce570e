#pragma once

#include <cmath>
#include <stdexcept>

#include "ddkf/numerics.hpp"
#include "ddkf/random.hpp"

namespace ddkf {

inline constexpr std::size_t kStateDim = 4;

/// Target state [x, y, vx, vy] in metres and metres per second.
using TargetState = Vector;

/// Discrete-time linear motion model x' = F x + u_g + G w, w ~ N(0, Q).
struct MotionModel {
  Matrix F;
  Matrix G;
  Matrix Q;
  Vector u_g;  // known deterministic input (gravity) per step
  double delta = 0.1;
  double g = 10.0;

  /// Covariance actually injected into the state: G Q G^T.
  [[nodiscard]] Matrix injected_covariance() const {
    return symmetrize(mat_mul(mat_mul(G, Q), transpose(G)));
  }
};

/// y = H x + v, v ~ N(0, R) with R = sigma2 * I.
struct MeasurementModel {
  Matrix H;
  Matrix R;
  double sigma2 = 1.0;

  static MeasurementModel identity(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      throw std::invalid_argument("measurement noise variance must be positive, got " +
                                  std::to_string(sigma2));
    }
    return {Matrix::identity(kStateDim), Matrix::scaled_identity(kStateDim, sigma2), sigma2};
  }
};

/// Exact zero-order discretization of the planar projectile
/// d' = v, v' = [0, -g]. With theta = [[0, I2], [0, 0]] nilpotent,
/// F = I + delta*theta and u_g = (delta*I + delta^2/2 * theta) n, n = [0,0,0,-g].
/// G and Q default to the identity and zero; callers scale them as needed.
[[nodiscard]] inline MotionModel discretize_projectile(double delta, double g) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("discretize_projectile: time step must be positive, got " +
                                std::to_string(delta));
  }
  if (!(g >= 0.0) || !std::isfinite(g)) {
    throw std::invalid_argument("discretize_projectile: gravity must be non-negative, got " +
                                std::to_string(g));
  }
  MotionModel m;
  m.delta = delta;
  m.g = g;
  m.F = Matrix::identity(kStateDim);
  m.F(0, 2) = delta;
  m.F(1, 3) = delta;
  m.G = Matrix::identity(kStateDim);
  m.Q = Matrix(kStateDim, kStateDim);
  // theta * n = [0, -g, 0, 0]
  m.u_g = Vector{0.0, -0.5 * delta * delta * g, 0.0, -delta * g};
  return m;
}

/// Same model with G = g_scale * I and Q = q_scale * I.
[[nodiscard]] inline MotionModel projectile_model(double delta, double g, double g_scale,
                                                  double q_scale) {
  MotionModel m = discretize_projectile(delta, g);
  m.G = Matrix::scaled_identity(kStateDim, g_scale);
  m.Q = Matrix::scaled_identity(kStateDim, q_scale);
  return m;
}

[[nodiscard]] inline TargetState step_truth(const TargetState& s, const MotionModel& m, Rng& rng) {
  TargetState next = mat_vec(m.F, s);
  next += m.u_g;
  next += mat_vec(m.G, gaussian(rng, m.Q));
  detail::require_finite(next, "step_truth");
  return next;
}

[[nodiscard]] inline Vector measure(const TargetState& s, const MeasurementModel& mm, Rng& rng) {
  Vector y = mat_vec(mm.H, s);
  y += gaussian(rng, mm.R);
  return y;
}

[[nodiscard]] inline TargetState initial_state(double x0, double y0, double v0, double angle) {
  return TargetState{x0, y0, v0 * std::cos(angle), v0 * std::sin(angle)};
}

}  // namespace ddkf
