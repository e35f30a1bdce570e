#pragma once

// Reference computations used to check the engine. They are written against
// Eigen, independently of ddkf::numerics and the engine code path.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ddkf/numerics.hpp"

namespace ddkf::testing {

using EMat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

inline EMat to_eigen(const Matrix& m) {
  EMat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline EVec to_eigen(const Vector& v) {
  EVec out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out(i) = v[i];
  return out;
}

inline Matrix from_eigen(const EMat& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline Vector from_eigen_vec(const EVec& v) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
  return out;
}

struct KfStep {
  EVec x_filt;  // x_{j|j}
  EMat P_filt;
  EVec x_pred;  // x_{j+1|j}
  EMat P_pred;
};

/// Textbook predict/update Kalman filter over a measurement stream.
/// x' = F x + u, P' = F P F^T + W; update with gain K = P H^T (H P H^T + R)^-1.
inline std::vector<KfStep> textbook_kf(const EVec& x0, const EMat& P0, const EMat& F, const EVec& u,
                                       const EMat& W, const EMat& H, const EMat& R,
                                       const std::vector<EVec>& ys) {
  std::vector<KfStep> out;
  EVec x = x0;
  EMat P = P0;
  const EMat I = EMat::Identity(x0.size(), x0.size());
  for (const EVec& y : ys) {
    const EMat S = H * P * H.transpose() + R;
    const EMat K = P * H.transpose() * S.inverse();
    KfStep s;
    s.x_filt = x + K * (y - H * x);
    s.P_filt = (I - K * H) * P;
    s.x_pred = F * s.x_filt + u;
    s.P_pred = F * s.P_filt * F.transpose() + W;
    x = s.x_pred;
    P = s.P_pred;
    out.push_back(s);
  }
  return out;
}

struct Measurement {
  EVec y;
  EMat H;
  EMat R;
};

/// One joint update with all measurements stacked into a single tall
/// observation (block-diagonal noise).
inline std::pair<EVec, EMat> batch_update(const EVec& x, const EMat& P,
                                          const std::vector<Measurement>& ms) {
  Eigen::Index rows = 0;
  for (const auto& m : ms) rows += m.H.rows();
  if (rows == 0) return {x, P};
  EMat H(rows, x.size());
  EMat R = EMat::Zero(rows, rows);
  EVec y(rows);
  Eigen::Index at = 0;
  for (const auto& m : ms) {
    const Eigen::Index r = m.H.rows();
    H.block(at, 0, r, x.size()) = m.H;
    R.block(at, at, r, r) = m.R;
    y.segment(at, r) = m.y;
    at += r;
  }
  // Information form: avoids inverting the large stacked innovation matrix.
  const EMat Rinv = R.ldlt().solve(EMat::Identity(rows, rows));
  const EMat info = P.ldlt().solve(EMat::Identity(x.size(), x.size())) + H.transpose() * Rinv * H;
  const EMat P_post = info.ldlt().solve(EMat::Identity(x.size(), x.size()));
  const EVec x_post = x + P_post * H.transpose() * Rinv * (y - H * x);
  return {x_post, P_post};
}

}  // namespace ddkf::testing
