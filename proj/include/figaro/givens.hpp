#pragma once

// Givens rotation primitives and the streaming head/tail transforms.
// A head/tail pair summarizes the effect of a whole sequence of
// rotations applied to repeated rows, which is what lets the main
// algorithm work on the inputs instead of the join output.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/matrix.hpp"

namespace figaro {

struct GivensCoeffs {
  double c = 1.0;  // cosine
  double s = 0.0;  // sine
  double r = 0.0;  // value that replaces the pivot entry
};

namespace detail {
// sign(0) is +1 so the map stays total and r = |b| when a = 0.
inline double sign_pos(double x) { return std::signbit(x) ? -1.0 : 1.0; }
}  // namespace detail

// Rotation zeroing b against pivot a: applying it to the column (a, b)
// yields (r, 0). For b = 0 this is the identity rotation with r = a.
// NaN inputs propagate into the coefficients.
inline GivensCoeffs givens_coeffs(double a, double b) {
  if (b == 0.0) return {1.0, 0.0, a};
  const double sg = detail::sign_pos(a);
  const double h = std::hypot(a, b);
  return {std::abs(a) / h, -sg * b / h, sg * h};
}

// Two-row plane rotation, in place. Only rows i and j change:
//   row_i' = c*row_i - s*row_j
//   row_j' = s*row_i + c*row_j
inline void apply_givens(Matrix& m, std::size_t i, std::size_t j,
                         const GivensCoeffs& g) {
  if (i >= m.rows() || j >= m.rows())
    throw error("apply_givens: row index out of range");
  if (i == j) throw error("apply_givens: rows must differ");
  auto ri = m.row(i);
  auto rj = m.row(j);
  for (std::size_t col = 0; col < m.cols(); ++col) {
    const double a = ri[col];
    const double b = rj[col];
    ri[col] = a * g.c - b * g.s;
    rj[col] = a * g.s + b * g.c;
  }
}

// head(A) = (1/sqrt(m)) * sum of rows.
inline std::vector<double> head(const Matrix& a) {
  if (a.rows() == 0) throw error("head: empty matrix");
  const std::size_t n = a.cols();
  std::vector<double> h(n, 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < n; ++j) h[j] += r[j];
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(a.rows()));
  for (double& x : h) x *= inv;
  return h;
}

// tail(A): row j (1-based) is
//   (sqrt(j)*A[j+1,:] - prefix_j/sqrt(j)) / sqrt(j+1)
// computed with one running prefix sum, O(mn) total.
inline Matrix tail(const Matrix& a) {
  if (a.rows() == 0) throw error("tail: empty matrix");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix t(m > 0 ? m - 1 : 0, n);
  if (m <= 1) return t;
  std::vector<double> prefix(a.row(0).begin(), a.row(0).end());
  for (std::size_t j = 1; j < m; ++j) {
    const double sj = std::sqrt(static_cast<double>(j));
    const double sj1 = std::sqrt(static_cast<double>(j + 1));
    auto next = a.row(j);
    auto out = t.row(j - 1);
    for (std::size_t col = 0; col < n; ++col)
      out[col] = (sj * next[col] - prefix[col] / sj) / sj1;
    for (std::size_t col = 0; col < n; ++col) prefix[col] += next[col];
  }
  return t;
}

namespace detail {
inline void check_weights(std::span<const double> v, std::size_t m,
                          const char* who) {
  if (v.size() != m)
    throw error(std::string(who) + ": weight length does not match row count");
  for (double w : v)
    if (!(w > 0.0)) throw error(std::string(who) + ": weights must be positive");
}
}  // namespace detail

// Weighted head: (1/||v||) * sum_i v[i]*A[i,:]. With all-ones weights this
// reduces to head(A) bit for bit.
inline std::vector<double> generalized_head(const Matrix& a,
                                            std::span<const double> v) {
  if (a.rows() == 0) throw error("generalized_head: empty matrix");
  detail::check_weights(v, a.rows(), "generalized_head");
  const std::size_t n = a.cols();
  std::vector<double> h(n, 0.0);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < n; ++j) h[j] += v[i] * r[j];
    norm2 += v[i] * v[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : h) x *= inv;
  return h;
}

// Weighted tail, streaming over a weighted prefix sum and the running
// norm of the weight prefix. Same O(mn) bound and summation order as
// the unweighted version.
inline Matrix generalized_tail(const Matrix& a, std::span<const double> v) {
  if (a.rows() == 0) throw error("generalized_tail: empty matrix");
  detail::check_weights(v, a.rows(), "generalized_tail");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix t(m - 1, n);
  if (m == 1) return t;
  std::vector<double> prefix(n);
  auto r0 = a.row(0);
  for (std::size_t col = 0; col < n; ++col) prefix[col] = v[0] * r0[col];
  double norm2 = v[0] * v[0];
  for (std::size_t j = 1; j < m; ++j) {
    const double np = std::sqrt(norm2);        // ||v[1..j]||
    norm2 += v[j] * v[j];
    const double nn = std::sqrt(norm2);        // ||v[1..j+1]||
    auto next = a.row(j);
    auto out = t.row(j - 1);
    for (std::size_t col = 0; col < n; ++col)
      out[col] = (np * next[col] - v[j] * prefix[col] / np) / nn;
    for (std::size_t col = 0; col < n; ++col) prefix[col] += v[j] * next[col];
  }
  return t;
}

// Reference transform that really multiplies out the rotation sequence
// underlying head/tail: builds G = R_m ... R_2 with
//   R_i = Giv(1, i, -v[i]/||v[1..i]||, ||v[1..i-1]||/||v[1..i]||)
// and returns G * [S (x) v | T]. Intended as the independent check that
// the block shortcut [||v|| S, H(T,v); 0, T(T,v)] is what the rotations
// produce; capped because it is quadratic on purpose.
inline Matrix rotation_sequence_oracle(std::span<const double> s,
                                       const Matrix& t,
                                       std::span<const double> v_in = {},
                                       std::size_t cap = 64) {
  const std::size_t m = t.rows();
  if (m == 0) throw error("rotation_sequence_oracle: empty matrix");
  if (m > cap) throw size_error("rotation_sequence_oracle: row cap exceeded");
  std::vector<double> ones;
  std::span<const double> v = v_in;
  if (v.empty()) {
    ones.assign(m, 1.0);
    v = ones;
  }
  detail::check_weights(v, m, "rotation_sequence_oracle");

  const std::size_t n1 = s.size();
  const std::size_t n2 = t.cols();
  Matrix a(m, n1 + n2);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = a.row(i);
    for (std::size_t j = 0; j < n1; ++j) row[j] = v[i] * s[j];
    auto tr = t.row(i);
    for (std::size_t j = 0; j < n2; ++j) row[n1 + j] = tr[j];
  }
  double norm2 = v[0] * v[0];
  for (std::size_t i = 1; i < m; ++i) {
    const double prev = std::sqrt(norm2);
    norm2 += v[i] * v[i];
    const double cur = std::sqrt(norm2);
    GivensCoeffs g{prev / cur, -v[i] / cur, 0.0};
    apply_givens(a, 0, i, g);
  }
  return a;
}

}  // namespace figaro
