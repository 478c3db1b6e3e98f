#pragma once

// Shared fixtures and independent reference implementations used as
// oracles across the test suite. Everything here stays deliberately
// naive so it cannot share a bug with the library code it checks.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "figaro/join_tree.hpp"
#include "figaro/matrix.hpp"
#include "figaro/relation.hpp"

namespace test_support {

using figaro::KeyTuple;
using figaro::Matrix;
using figaro::Relation;

inline KeyTuple ikey(std::initializer_list<long long> values) {
  KeyTuple k;
  for (long long v : values) k.push_back(static_cast<std::int64_t>(v));
  return k;
}

struct RowSpec {
  KeyTuple key;
  std::vector<double> data;
};

inline Relation make_relation(std::string name,
                              std::vector<std::string> key_attrs,
                              std::vector<std::string> data_attrs,
                              const std::vector<RowSpec>& rows) {
  Relation rel;
  rel.name = std::move(name);
  rel.key_attrs = std::move(key_attrs);
  rel.data_attrs = std::move(data_attrs);
  rel.keys.reserve(rows.size());
  rel.data.resize(rows.size(), rel.data_attrs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rel.keys.push_back(rows[i].key);
    for (std::size_t j = 0; j < rows[i].data.size(); ++j)
      rel.data(i, j) = rows[i].data[j];
  }
  figaro::canonicalize(rel);
  return rel;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols,
                            std::uint64_t seed, double lo = -3.0,
                            double hi = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline std::vector<double> random_positive(std::size_t n, std::uint64_t seed,
                                           double lo = 0.1, double hi = 4.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Per-row re-evaluation of the tail definition, fresh sums each row.
inline Matrix naive_tail(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix t(m == 0 ? 0 : m - 1, n);
  for (std::size_t j = 1; j < m; ++j) {
    for (std::size_t col = 0; col < n; ++col) {
      double prefix = 0.0;
      for (std::size_t i = 0; i < j; ++i) prefix += a(i, col);
      const double sj = std::sqrt(static_cast<double>(j));
      t(j - 1, col) =
          (sj * a(j, col) - prefix / sj) / std::sqrt(static_cast<double>(j + 1));
    }
  }
  return t;
}

inline Matrix naive_generalized_tail(const Matrix& a,
                                     const std::vector<double>& v) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix t(m == 0 ? 0 : m - 1, n);
  for (std::size_t j = 1; j < m; ++j) {
    double norm_to_j = 0.0;
    for (std::size_t i = 0; i < j; ++i) norm_to_j += v[i] * v[i];
    const double np = std::sqrt(norm_to_j);
    const double nn = std::sqrt(norm_to_j + v[j] * v[j]);
    for (std::size_t col = 0; col < n; ++col) {
      double prefix = 0.0;
      for (std::size_t i = 0; i < j; ++i) prefix += v[i] * a(i, col);
      t(j - 1, col) = (np * a(j, col) - v[j] * prefix / np) / nn;
    }
  }
  return t;
}

// Upper Cholesky factor of a symmetric positive definite matrix;
// independent route to the triangular factor via the Gram matrix.
inline Matrix cholesky_upper(const Matrix& g) {
  const std::size_t n = g.rows();
  Matrix u(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = g(i, i);
    for (std::size_t k = 0; k < i; ++k) d -= u(k, i) * u(k, i);
    u(i, i) = std::sqrt(d);
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = g(i, j);
      for (std::size_t k = 0; k < i; ++k) s -= u(k, i) * u(k, j);
      u(i, j) = s / u(i, i);
    }
  }
  return u;
}

// Concrete four-relation instance over a bushy tree: R1 joins R2 on A;
// R2 joins R3 on B and R4 on C. All eight (A,B,C) combinations occur,
// so the database is already fully reduced.
struct FourRelationDb {
  std::vector<Relation> relations;
  figaro::JoinTree tree;  // R1(R2(R3,R4))
};

inline FourRelationDb make_four_relation_db() {
  FourRelationDb db;
  db.relations.push_back(make_relation(
      "R1", {"A"}, {"u0"},
      {{ikey({1}), {0.5}}, {ikey({1}), {1.5}}, {ikey({2}), {-1.0}}}));
  db.relations.push_back(make_relation(
      "R2", {"A", "B", "C"}, {"v0", "v1"},
      {{ikey({1, 1, 1}), {1.0, -0.5}},
       {ikey({1, 1, 1}), {0.5, 2.0}},
       {ikey({1, 1, 2}), {2.0, 1.0}},
       {ikey({1, 2, 1}), {-1.5, 0.5}},
       {ikey({1, 2, 2}), {0.25, -2.0}},
       {ikey({2, 1, 1}), {3.0, 0.5}},
       {ikey({2, 1, 2}), {1.0, 1.0}},
       {ikey({2, 1, 2}), {-0.75, 0.5}},
       {ikey({2, 2, 1}), {0.5, -1.0}},
       {ikey({2, 2, 2}), {2.5, 1.5}}}));
  db.relations.push_back(make_relation(
      "R3", {"B"}, {"w0"},
      {{ikey({1}), {2.0}}, {ikey({1}), {0.25}}, {ikey({2}), {1.0}}}));
  db.relations.push_back(make_relation(
      "R4", {"C"}, {"x0"},
      {{ikey({1}), {0.75}}, {ikey({1}), {-0.5}}, {ikey({1}), {1.25}},
       {ikey({2}), {3.0}}}));
  db.tree = figaro::build_join_tree(db.relations, 0, {-1, 0, 1, 1});
  figaro::validate_join_tree(db.relations, db.tree);
  return db;
}

}  // namespace test_support
