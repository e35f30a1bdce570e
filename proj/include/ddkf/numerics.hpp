#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ddkf {

/// Raised when a numeric precondition fails (shape mismatch, non-SPD pivot,
/// non-finite result). The message names the offending matrix role.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense column vector of reals.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  [[nodiscard]] std::size_t dim() const noexcept { return data_.size(); }
  [[nodiscard]] double& operator[](std::size_t i) noexcept { return data_[i]; }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return data_[i]; }
  [[nodiscard]] std::span<const double> entries() const noexcept { return data_; }
  [[nodiscard]] std::span<double> entries() noexcept { return data_; }

  [[nodiscard]] double squared_norm() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  [[nodiscard]] double norm() const noexcept { return std::sqrt(squared_norm()); }

  Vector& operator+=(const Vector& rhs) {
    check_same(rhs, "vector +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& rhs) {
    check_same(rhs, "vector -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
  }
  Vector& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(double s, Vector a) { return a *= s; }
  friend bool operator==(const Vector&, const Vector&) = default;

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  void check_same(const Vector& rhs, const char* what) const {
    if (rhs.dim() != dim()) {
      throw NumericError(std::string(what) + ": dimension mismatch " + std::to_string(dim()) +
                         " vs " + std::to_string(rhs.dim()));
    }
  }

  std::vector<double> data_;
};

/// Dense row-major matrix. Sized for the small problems here (4x4 models,
/// N x N weight matrices with N up to a few dozen).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw NumericError("matrix literal: ragged rows");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }
  static Matrix scaled_identity(std::size_t n, double s) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = s;
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }
  [[nodiscard]] double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }
  [[nodiscard]] std::span<const double> entries() const noexcept { return data_; }

  Matrix& operator+=(const Matrix& rhs) {
    check_same(rhs, "matrix +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& rhs) {
    check_same(rhs, "matrix -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  [[nodiscard]] double trace() const noexcept {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

 private:
  void check_same(const Matrix& rhs, const char* what) const {
    if (rhs.rows_ != rows_ || rhs.cols_ != cols_) {
      throw NumericError(std::string(what) + ": shape mismatch");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) throw NumericError(std::string(op) + ": non-finite result");
}

inline void require_finite(const Vector& v, const char* op) {
  if (!v.all_finite()) throw NumericError(std::string(op) + ": non-finite result");
}

}  // namespace detail

[[nodiscard]] inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw NumericError("mat_mul: dimension mismatch " + detail::shape(a) + " * " +
                       detail::shape(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  detail::require_finite(out, "mat_mul");
  return out;
}

[[nodiscard]] inline Vector mat_vec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.dim()) {
    throw NumericError("mat_vec: dimension mismatch " + detail::shape(a) + " * " +
                       std::to_string(x.dim()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * x[k];
    out[i] = s;
  }
  detail::require_finite(out, "mat_vec");
  return out;
}

[[nodiscard]] inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// (A + A^T) / 2.
[[nodiscard]] inline Matrix symmetrize(const Matrix& a) {
  if (!a.is_square()) throw NumericError("symmetrize: non-square " + detail::shape(a));
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    s(i, i) = a(i, i);
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

inline constexpr double kSpdPivotTolerance = 1e-12;

/// Lower-triangular Cholesky factor L with A = L L^T. `role` names the matrix
/// in error messages (e.g. "innovation covariance R_e").
[[nodiscard]] inline Matrix cholesky(const Matrix& a, std::string_view role = "matrix") {
  if (!a.is_square()) {
    throw NumericError("cholesky: " + std::string(role) + " is not square (" + detail::shape(a) +
                       ")");
  }
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > kSpdPivotTolerance)) {
      throw NumericError(std::string(role) + " is not symmetric positive definite (pivot " +
                         std::to_string(j) + " = " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Inverse of a symmetric positive definite matrix via Cholesky. The result
/// is exactly symmetric.
[[nodiscard]] inline Matrix inverse_spd(const Matrix& a, std::string_view role = "matrix") {
  const Matrix l = cholesky(a, role);
  const std::size_t n = l.rows();
  // Linv: forward substitution on the identity.
  Matrix linv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    linv(c, c) = 1.0 / l(c, c);
    for (std::size_t i = c + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = c; k < i; ++k) s -= l(i, k) * linv(k, c);
      linv(i, c) = s / l(i, i);
    }
  }
  // A^-1 = Linv^T Linv, lower triangle then mirrored.
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = i; k < n; ++k) s += linv(k, i) * linv(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  }
  detail::require_finite(inv, "inverse_spd");
  return inv;
}

/// General inverse by Gauss-Jordan elimination with partial pivoting.
[[nodiscard]] inline Matrix inverse(const Matrix& a, std::string_view role = "matrix") {
  if (!a.is_square()) {
    throw NumericError("inverse: " + std::string(role) + " is not square (" + detail::shape(a) +
                       ")");
  }
  const std::size_t n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(work(r, c)) > std::abs(work(pivot, c))) pivot = r;
    if (std::abs(work(pivot, c)) <= kSpdPivotTolerance) {
      throw NumericError(std::string(role) + " is singular");
    }
    if (pivot != c) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(c, j), work(pivot, j));
        std::swap(inv(c, j), inv(pivot, j));
      }
    }
    const double d = work(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      work(c, j) /= d;
      inv(c, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = work(r, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(r, j) -= f * work(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  detail::require_finite(inv, "inverse");
  return inv;
}

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending. Only the
/// symmetric part of `a` is used.
[[nodiscard]] inline std::vector<double> symmetric_eigenvalues(const Matrix& a) {
  Matrix s = symmetrize(a);
  const std::size_t n = s.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += s(i, j) * s(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s(p, q) == 0.0) continue;
        const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p);
          const double skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k);
          const double sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = s(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

[[nodiscard]] inline double min_symmetric_eigenvalue(const Matrix& a) {
  const auto eig = symmetric_eigenvalues(a);
  return eig.empty() ? 0.0 : eig.front();
}

[[nodiscard]] inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw NumericError("max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    m = std::max(m, std::abs(a.entries()[i] - b.entries()[i]));
  return m;
}

}  // namespace ddkf
