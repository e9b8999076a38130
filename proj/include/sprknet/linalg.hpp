#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sprknet {

using Vec = std::vector<double>;

// Dense row-major matrix. Everything in this library lives in phase spaces of
// a handful of dimensions, so no external linear algebra is pulled in.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline void axpy(Vec& y, double alpha, const Vec& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline Vec matvec(const Mat& m, const Vec& v) {
  Vec out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += m(r, c) * v[c];
    out[r] = s;
  }
  return out;
}

// m^T v without forming the transpose.
inline Vec tmatvec(const Mat& m, const Vec& v) {
  Vec out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += m(r, c) * v[r];
  return out;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Mat out(a.rows, b.cols);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double ark = a(r, k);
      if (ark == 0.0) continue;
      for (std::size_t c = 0; c < b.cols; ++c) out(r, c) += ark * b(k, c);
    }
  return out;
}

inline Mat transpose(const Mat& m) {
  Mat out(m.cols, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out(c, r) = m(r, c);
  return out;
}

inline double max_abs(const Mat& m) {
  double v = 0.0;
  for (double x : m.data) v = std::max(v, std::abs(x));
  return v;
}

// In-place d[rows_out .. rows_out+n) += alpha * jac * d[rows_in .. rows_in+n)
// where jac is n x n. Used to chain stage Jacobians through the phase-space
// blocks of a step Jacobian; the two row ranges must not overlap.
inline void accumulate_rows(Mat& d, const Mat& jac, double alpha, std::size_t rows_out,
                            std::size_t rows_in) {
  const std::size_t n = jac.rows;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < n; ++k) {
      const double scale = alpha * jac(r, k);
      if (scale == 0.0) continue;
      for (std::size_t c = 0; c < d.cols; ++c)
        d(rows_out + r, c) += scale * d(rows_in + k, c);
    }
}

// Canonical symplectic matrix J = [[0, I], [-I, 0]] on a 2n-dimensional space.
inline Mat symplectic_j(std::size_t half_dim) {
  Mat j(2 * half_dim, 2 * half_dim);
  for (std::size_t i = 0; i < half_dim; ++i) {
    j(i, half_dim + i) = 1.0;
    j(half_dim + i, i) = -1.0;
  }
  return j;
}

// Largest eigenvalue of a symmetric matrix by cyclic Jacobi sweeps. The
// matrices here are tiny (phase dimension a handful), and the symplectic-norm
// bounds need full precision even when the spectrum is clustered near 1,
// where power iteration stalls.
inline double symmetric_eigen_max(Mat s) {
  const std::size_t n = s.rows;
  if (n == 0) return 0.0;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    double diag = 0.0;
    for (std::size_t p = 0; p < n; ++p) diag = std::max(diag, std::abs(s(p, p)));
    if (off <= 1e-30 * std::max(1.0, diag * diag)) break;

    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = s(p, q);
        if (apq == 0.0) continue;
        const double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
  }
  double lam = s(0, 0);
  for (std::size_t p = 1; p < n; ++p) lam = std::max(lam, s(p, p));
  return lam;
}

// Largest singular value, via the eigenvalues of m^T m.
inline double spectral_norm(const Mat& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  Mat gram(m.cols, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t i = 0; i < m.cols; ++i) {
      const double mri = m(r, i);
      if (mri == 0.0) continue;
      for (std::size_t j = 0; j < m.cols; ++j) gram(i, j) += mri * m(r, j);
    }
  return std::sqrt(std::max(0.0, symmetric_eigen_max(std::move(gram))));
}

}  // namespace sprknet
