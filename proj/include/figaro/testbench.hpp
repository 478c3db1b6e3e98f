#pragma once

// Verification harness: reverse-engineered ground-truth instances whose
// exact triangular factor is known in advance, the relative-error
// metric, and a seeded generator of random acyclic databases.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "figaro/counts.hpp"
#include "figaro/error.hpp"
#include "figaro/join.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/matrix.hpp"
#include "figaro/postprocess.hpp"
#include "figaro/reduce.hpp"
#include "figaro/relation.hpp"

namespace figaro::bench {

// Two keyless relations whose join is their Cartesian product. The
// leading n1 x n1 block of the join's triangular factor equals r_fixed
// by construction: the left relation is an orthonormal basis times
// r_fixed (scaled by 1/sqrt(q)), and the right relation has zero-sum
// columns, which kills the cross block of the Gram matrix.
struct GroundTruthInstance {
  Matrix r_fixed;
  std::vector<Relation> relations;  // index 0 is the root
  JoinTree tree;
  std::uint64_t seed = 0;
};

namespace detail {

inline Relation make_data_relation(std::string name, std::string col_prefix,
                                   const Matrix& data) {
  Relation rel;
  rel.name = std::move(name);
  for (std::size_t j = 0; j < data.cols(); ++j)
    rel.data_attrs.push_back(col_prefix + std::to_string(j));
  rel.keys.assign(data.rows(), KeyTuple{});
  rel.data = data;
  canonicalize(rel);
  return rel;
}

}  // namespace detail

inline GroundTruthInstance generate_ground_truth(std::size_t p, std::size_t q,
                                                 std::size_t n1,
                                                 std::size_t n2,
                                                 std::uint64_t seed) {
  if (p < n1) throw error("generate_ground_truth: need p >= n1");
  if (q < 1) throw error("generate_ground_truth: need q >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> diag(1.0, 2.0);
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  std::uniform_real_distribution<double> wide(-3.0, 3.0);

  GroundTruthInstance inst;
  inst.seed = seed;
  inst.r_fixed.resize(n1, n1);
  for (std::size_t i = 0; i < n1; ++i) {
    inst.r_fixed(i, i) = diag(rng);
    for (std::size_t j = i + 1; j < n1; ++j) inst.r_fixed(i, j) = off(rng);
  }

  Matrix g(p, n1);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < n1; ++j) g(i, j) = off(rng);
  Matrix q_basis;
  householder_qr(g, &q_basis);

  const double inv_sq = 1.0 / std::sqrt(static_cast<double>(q));
  Matrix s(p, n1);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < n1; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k <= j; ++k)
        acc += q_basis(i, k) * inst.r_fixed(k, j);
      s(i, j) = acc * inv_sq;
    }

  Matrix t(q, n2);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < n2; ++j) t(i, j) = wide(rng);
  // Two rounds of mean removal leave each column sum at a few ulps.
  for (int round = 0; round < 2; ++round)
    for (std::size_t j = 0; j < n2; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < q; ++i) mean += t(i, j);
      mean /= static_cast<double>(q);
      for (std::size_t i = 0; i < q; ++i) t(i, j) -= mean;
    }

  inst.relations.push_back(detail::make_data_relation("S", "s", s));
  inst.relations.push_back(detail::make_data_relation("T", "t", t));
  inst.tree = build_join_tree(inst.relations, 0, {-1, 0});
  return inst;
}

// Relative Frobenius error after sign normalization of both factors.
inline double relative_error(const Matrix& r_hat, const Matrix& r_fixed) {
  if (r_hat.rows() != r_fixed.rows() || r_hat.cols() != r_fixed.cols())
    throw error("relative_error: shape mismatch");
  return rel_frobenius_distance(normalize_signs(r_hat),
                                normalize_signs(r_fixed));
}

// Leading block extractor for comparing against a fixed factor.
inline Matrix leading_block(const Matrix& m, std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = m(i, j);
  return out;
}

// Plain uniform Cartesian pair for timing runs: two keyless relations
// of `rows` x `cols` each, data uniform in [-3, 3).
inline std::vector<Relation> random_cartesian_pair(std::size_t rows,
                                                   std::size_t cols,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> wide(-3.0, 3.0);
  auto fill = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) m(i, j) = wide(rng);
    return m;
  };
  std::vector<Relation> rels;
  rels.push_back(detail::make_data_relation("S", "s", fill(rows, cols)));
  rels.push_back(detail::make_data_relation("T", "t", fill(rows, cols)));
  return rels;
}

struct RandomDbSpec {
  int min_relations = 2;
  int max_relations = 5;
  std::size_t max_rows = 50;
  std::size_t max_total_data_cols = 6;
  int key_domain = 4;  // values per key attribute; 1 makes the join Cartesian
  std::uint64_t join_cap = 20'000;
  std::uint64_t min_join_rows = 0;
  // Reject candidates whose brute-force count sub-joins would blow up,
  // so oracle comparisons stay desk-scale.
  bool screen_count_oracle = true;
};

struct RandomDatabase {
  std::vector<Relation> relations;  // already fully reduced
  JoinTree tree;
  std::uint64_t seed_used = 0;
  std::uint64_t join_rows = 0;
};

// Seeded generator: random tree shape, per-edge key attributes (with
// occasional reuse along a chain, which keeps the path property),
// child keys drawn mostly from the parent's realized values, data
// uniform in [-3, 3). Retries with derived seeds until the instance is
// reduced, non-empty and within the caps.
inline RandomDatabase random_acyclic_database(const RandomDbSpec& spec,
                                              std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    const std::uint64_t used = seed + attempt * 0x9E3779B97F4A7C15ull;
    std::mt19937_64 rng(used);
    auto uniform = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    std::uniform_real_distribution<double> wide(-3.0, 3.0);

    const std::size_t r = uniform(static_cast<std::size_t>(spec.min_relations),
                                  static_cast<std::size_t>(spec.max_relations));
    std::vector<int> parent(r, -1);
    for (std::size_t i = 1; i < r; ++i)
      parent[i] = static_cast<int>(uniform(0, i - 1));

    // One fresh attribute per edge; sometimes the parent's own edge
    // attribute rides along, so the attribute spans a chain.
    std::vector<std::vector<std::string>> edge_attrs(r);
    std::map<std::string, std::size_t> domain_of;
    for (std::size_t i = 1; i < r; ++i) {
      std::string fresh = "k" + std::to_string(i);
      edge_attrs[i].push_back(fresh);
      domain_of[fresh] = uniform(1, static_cast<std::size_t>(spec.key_domain));
      const int p = parent[i];
      if (p > 0 && !edge_attrs[p].empty() && uniform(0, 3) == 0)
        edge_attrs[i].push_back(edge_attrs[p].front());
    }
    std::vector<std::vector<std::string>> key_attrs(r);
    for (std::size_t i = 1; i < r; ++i) {
      for (const auto& a : edge_attrs[i]) {
        auto add_unique = [&](std::vector<std::string>& v) {
          if (std::find(v.begin(), v.end(), a) == v.end()) v.push_back(a);
        };
        add_unique(key_attrs[i]);
        add_unique(key_attrs[static_cast<std::size_t>(parent[i])]);
      }
    }

    // Data column budget: one per relation, leftovers spread randomly.
    std::vector<std::size_t> data_cols(r, 1);
    const std::size_t budget =
        std::max<std::size_t>(r, uniform(r, std::max<std::size_t>(
                                                r, spec.max_total_data_cols)));
    for (std::size_t extra = 0; extra < budget - r; ++extra)
      ++data_cols[uniform(0, r - 1)];

    std::vector<Relation> rels(r);
    std::size_t data_name_counter = 0;
    bool ok = true;
    for (std::size_t i = 0; i < r && ok; ++i) {
      Relation& rel = rels[i];
      rel.name = "R" + std::to_string(i);
      rel.key_attrs = key_attrs[i];
      for (std::size_t c = 0; c < data_cols[i]; ++c)
        rel.data_attrs.push_back("y" + std::to_string(data_name_counter++));
      const std::size_t rows = uniform(1, spec.max_rows);
      rel.keys.resize(rows);
      rel.data.resize(rows, rel.data_attrs.size());
      for (std::size_t row = 0; row < rows; ++row) {
        rel.keys[row].resize(rel.key_attrs.size());
        for (std::size_t c = 0; c < rel.key_attrs.size(); ++c) {
          const auto& attr = rel.key_attrs[c];
          const auto& par =
              i > 0 ? rels[static_cast<std::size_t>(parent[i])] : rel;
          auto in_parent_edge = [&] {
            return i > 0 && std::find(edge_attrs[i].begin(),
                                      edge_attrs[i].end(),
                                      attr) != edge_attrs[i].end();
          };
          if (in_parent_edge() && uniform(0, 9) != 0 && par.row_count() > 0) {
            // Copy from a random parent row to guarantee overlap.
            const auto& pk = par.keys[uniform(0, par.row_count() - 1)];
            auto it = std::find(par.key_attrs.begin(), par.key_attrs.end(),
                                attr);
            rel.keys[row][c] =
                pk[static_cast<std::size_t>(it - par.key_attrs.begin())];
          } else {
            rel.keys[row][c] = static_cast<std::int64_t>(
                uniform(1, domain_of.at(attr)));
          }
        }
        for (std::size_t c = 0; c < rel.data_attrs.size(); ++c)
          rel.data(row, c) = wide(rng);
      }
      canonicalize(rel);
    }
    if (!ok) continue;

    RandomDatabase db;
    db.seed_used = used;
    db.tree = build_join_tree(rels, 0, parent);
    validate_join_tree(rels, db.tree);
    try {
      db.relations = semi_join_reduce(std::move(rels), db.tree);
      Layout layout = make_layout(db.relations, db.tree);
      db.join_rows = for_each_join_row(db.relations, db.tree, layout, nullptr,
                                       spec.join_cap);
      if (db.join_rows < std::max<std::uint64_t>(spec.min_join_rows, 1))
        continue;
      if (spec.screen_count_oracle)
        brute_force_counts(db.relations, db.tree);
    } catch (const empty_join_error&) {
      continue;
    } catch (const size_error&) {
      continue;
    }
    return db;
  }
  throw error("random_acyclic_database: no viable instance after 200 tries");
}

}  // namespace figaro::bench
