#pragma once

// Turns the almost-triangular block stack into the canonical R:
// per-block Givens triangularization, a worker-partitioned merge of the
// surviving rows, and positive-diagonal normalization. Also hosts the
// Householder reference factorization and streaming Q recovery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/figaro.hpp"
#include "figaro/givens.hpp"
#include "figaro/join.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/matrix.hpp"
#include "figaro/parallel.hpp"

namespace figaro {

struct TriangularFactor {
  Matrix r;  // square, entries below the diagonal exactly zero
  std::vector<std::string> column_names;
  // Rows whose diagonal is exactly zero (rank deficiency marker).
  std::vector<std::size_t> zero_diagonal_rows;
};

// Givens elimination below the diagonal, left-to-right and top-down.
// Eliminated entries are stored as exact zeros; all-zero rows are
// dropped, so at most min(m, n) rows survive.
inline Matrix triangularize_block(Matrix b) {
  const std::size_t m = b.rows();
  const std::size_t n = b.cols();
  for (std::size_t c = 0; c < std::min(m, n); ++c) {
    for (std::size_t r = c + 1; r < m; ++r) {
      if (b(r, c) == 0.0) continue;
      const GivensCoeffs g = givens_coeffs(b(c, c), b(r, c));
      for (std::size_t j = c; j < n; ++j) {
        const double x = b(c, j);
        const double y = b(r, j);
        b(c, j) = x * g.c - y * g.s;
        b(r, j) = x * g.s + y * g.c;
      }
      b(c, c) = g.r;
      b(r, c) = 0.0;
    }
  }
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < std::min(m, n); ++r) {
    auto row = b.row(r);
    if (std::any_of(row.begin(), row.end(),
                    [](double x) { return x != 0.0; }))
      keep.push_back(r);
  }
  Matrix out(keep.size(), n);
  for (std::size_t i = 0; i < keep.size(); ++i)
    std::copy(b.row(keep[i]).begin(), b.row(keep[i]).end(),
              out.row(i).begin());
  return out;
}

namespace detail {

// Square accumulator for row-insertion QR. Row c, when occupied, has
// its leading nonzero exactly at column c.
struct TriangularAccumulator {
  Matrix r;
  std::vector<char> occupied;

  explicit TriangularAccumulator(std::size_t n)
      : r(n, n), occupied(n, 0) {}

  void absorb(std::vector<double>& v, std::size_t from) {
    const std::size_t n = r.cols();
    for (std::size_t c = from; c < n; ++c) {
      if (v[c] == 0.0) continue;
      if (!occupied[c]) {
        for (std::size_t j = c; j < n; ++j) r(c, j) = v[j];
        occupied[c] = 1;
        return;
      }
      const GivensCoeffs g = givens_coeffs(r(c, c), v[c]);
      for (std::size_t j = c; j < n; ++j) {
        const double x = r(c, j);
        const double y = v[j];
        r(c, j) = x * g.c - y * g.s;
        v[j] = x * g.s + y * g.c;
      }
      r(c, c) = g.r;
      v[c] = 0.0;
    }
  }

  // Folds another accumulator in, top row first.
  void merge(TriangularAccumulator& other) {
    const std::size_t n = r.cols();
    std::vector<double> v(n);
    for (std::size_t c = 0; c < n; ++c) {
      if (!other.occupied[c]) continue;
      std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(c), 0.0);
      for (std::size_t j = c; j < n; ++j) v[j] = other.r(c, j);
      absorb(v, c);
    }
  }
};

}  // namespace detail

// Parallel Givens merge: rows of the upper-trapezoidal blocks are
// divided among the workers, each worker triangularizes its share, and
// the per-worker partials are folded together in a balanced tournament.
// The result is square and upper-triangular but not yet sign-normalized.
inline TriangularFactor thin_merge(const std::vector<OutBlock>& blocks,
                                   std::size_t columns, unsigned workers) {
  struct RowRef {
    const OutBlock* block;
    std::size_t row;
  };
  std::vector<RowRef> rows;
  for (const auto& b : blocks) {
    if (b.col_begin + b.rows.cols() > columns)
      throw error("thin_merge: block exceeds column count");
    for (std::size_t r = 0; r < b.rows.rows(); ++r) rows.push_back({&b, r});
  }

  const unsigned t =
      std::max<unsigned>(1, std::min<std::size_t>(workers, rows.size()));
  std::vector<detail::TriangularAccumulator> partial(
      t, detail::TriangularAccumulator(columns));
  parallel_for(t, t, [&](std::size_t begin, std::size_t end) {
    for (std::size_t w = begin; w < end; ++w) {
      const std::size_t lo = rows.size() * w / t;
      const std::size_t hi = rows.size() * (w + 1) / t;
      std::vector<double> v(columns);
      for (std::size_t i = lo; i < hi; ++i) {
        const OutBlock& b = *rows[i].block;
        std::fill(v.begin(), v.end(), 0.0);
        auto src = b.rows.row(rows[i].row);
        std::copy(src.begin(), src.end(),
                  v.begin() + static_cast<std::ptrdiff_t>(b.col_begin));
        partial[w].absorb(v, b.col_begin);
      }
    }
  });

  // Balanced tournament over the worker partials.
  std::size_t live = t;
  while (live > 1) {
    const std::size_t pairs = live / 2;
    parallel_for(pairs, workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t p = begin; p < end; ++p)
        partial[2 * p].merge(partial[2 * p + 1]);
    });
    // Compact winners (and the odd one out) to the front.
    std::size_t next = 0;
    for (std::size_t p = 0; p < pairs; ++p)
      std::swap(partial[next++], partial[2 * p]);
    if (live % 2) std::swap(partial[next++], partial[live - 1]);
    live = next;
  }

  TriangularFactor out;
  out.r = std::move(partial[0].r);
  return out;
}

// Negates rows with a negative diagonal entry, making the factor the
// unique positive-diagonal one; zero-diagonal rows are only recorded.
inline TriangularFactor normalize_signs(TriangularFactor f) {
  f.zero_diagonal_rows.clear();
  for (std::size_t i = 0; i < f.r.rows(); ++i) {
    if (f.r(i, i) < 0.0) {
      auto row = f.r.row(i);
      for (double& x : row) x = (x == 0.0) ? 0.0 : -x;
    } else if (f.r(i, i) == 0.0) {
      f.zero_diagonal_rows.push_back(i);
    }
  }
  return f;
}

inline Matrix normalize_signs(Matrix r) {
  TriangularFactor f;
  f.r = std::move(r);
  return normalize_signs(std::move(f)).r;
}

// Classical Householder QR. Returns the square factor; if thin_q is
// given it receives the m x n orthonormal basis.
inline Matrix householder_qr(const Matrix& a, Matrix* thin_q = nullptr) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n)
    throw error("householder_qr: expected at least as many rows as columns");
  Matrix work = a;
  std::vector<std::vector<double>> reflectors;
  reflectors.reserve(n);

  for (std::size_t k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += work(i, k) * work(i, k);
    const double norm = std::sqrt(norm2);
    std::vector<double> v(m - k, 0.0);
    if (norm != 0.0) {
      const double alpha = work(k, k) >= 0.0 ? -norm : norm;
      for (std::size_t i = k; i < m; ++i) v[i - k] = work(i, k);
      v[0] -= alpha;
      double vtv = 0.0;
      for (double x : v) vtv += x * x;
      if (vtv != 0.0) {
        const double beta = 2.0 / vtv;
        for (std::size_t j = k; j < n; ++j) {
          double dot = 0.0;
          for (std::size_t i = k; i < m; ++i) dot += v[i - k] * work(i, j);
          dot *= beta;
          for (std::size_t i = k; i < m; ++i) work(i, j) -= dot * v[i - k];
        }
      }
      work(k, k) = alpha;
      for (std::size_t i = k + 1; i < m; ++i) work(i, k) = 0.0;
    }
    reflectors.push_back(std::move(v));
  }

  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r(i, j) = work(i, j);

  if (thin_q) {
    Matrix q(m, n);
    for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
    for (std::size_t k = n; k-- > 0;) {
      const auto& v = reflectors[k];
      double vtv = 0.0;
      for (double x : v) vtv += x * x;
      if (vtv == 0.0) continue;
      const double beta = 2.0 / vtv;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t i = k; i < m; ++i) dot += v[i - k] * q(i, j);
        dot *= beta;
        for (std::size_t i = k; i < m; ++i) q(i, j) -= dot * v[i - k];
      }
    }
    *thin_q = std::move(q);
  }
  return r;
}

// Reference factorization used to cross-check the factorized pipeline.
inline Matrix householder_oracle(const Matrix& a) {
  return normalize_signs(householder_qr(a));
}

// Full post-processing: triangularize each block, then merge. The
// per-block step runs in parallel across blocks.
inline TriangularFactor postprocess_thin(const AlmostTriangular& r0,
                                         unsigned workers) {
  std::vector<OutBlock> shrunk(r0.blocks.size());
  parallel_for(r0.blocks.size(), workers,
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t i = begin; i < end; ++i) {
                   shrunk[i].node = r0.blocks[i].node;
                   shrunk[i].col_begin = r0.blocks[i].col_begin;
                   shrunk[i].rows = triangularize_block(r0.blocks[i].rows);
                 }
               });
  return thin_merge(shrunk, r0.columns, workers);
}

inline TriangularFactor postprocess_householder(const AlmostTriangular& r0) {
  Matrix dense = r0.dense();
  if (dense.rows() < dense.cols()) {
    // Pad with zero rows; the factor of the padded stack is identical.
    Matrix padded(dense.cols(), dense.cols());
    for (std::size_t i = 0; i < dense.rows(); ++i)
      std::copy(dense.row(i).begin(), dense.row(i).end(),
                padded.row(i).begin());
    dense = std::move(padded);
  }
  TriangularFactor out;
  out.r = householder_qr(dense);
  return out;
}

// Streams the rows of Q = A R^{-1} without materializing A: every join
// row is solved by back-substitution and handed to the sink together
// with the original row. Returns the number of rows streamed.
inline std::uint64_t recover_q(
    const std::vector<Relation>& relations, const JoinTree& tree,
    const Layout& layout, const TriangularFactor& factor,
    const std::function<void(std::span<const double> /*a_row*/,
                             std::span<const double> /*q_row*/)>& sink,
    std::uint64_t cap = kDefaultJoinCap) {
  const Matrix& r = factor.r;
  const std::size_t n = r.cols();
  if (n != layout.total)
    throw error("recover_q: factor size does not match column layout");
  const double tol = 1e-12 * frobenius_norm(r);
  for (std::size_t i = 0; i < n; ++i)
    if (!(std::abs(r(i, i)) > tol))
      throw rank_error("recover_q: triangular factor is singular at column " +
                       std::to_string(i));

  std::vector<double> q(n);
  return for_each_join_row(
      relations, tree, layout,
      [&](std::span<const double> row) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = row[j];
          for (std::size_t i = 0; i < j; ++i) acc -= q[i] * r(i, j);
          q[j] = acc / r(j, j);
        }
        sink(row, q);
      },
      cap);
}

}  // namespace figaro
