#pragma once

// The factorized transform itself. Walks the join tree bottom-up,
// replaces every per-key row group by its head and a scaled tail, joins
// child summaries with scale propagation, and aggregates shared keys
// away with weighted heads/tails. The result is a stack of blocks with
// at most one row per input row, orthogonally equivalent to the data
// columns of the full join.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "figaro/counts.hpp"
#include "figaro/error.hpp"
#include "figaro/givens.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/matrix.hpp"
#include "figaro/parallel.hpp"
#include "figaro/relation.hpp"

namespace figaro {

// One dense block of the output; columns outside
// [col_begin, col_begin + rows.cols()) are implicit zeros.
struct OutBlock {
  int node = -1;
  std::size_t col_begin = 0;
  Matrix rows;
};

// The almost upper-triangular output: blocks stacked over the global
// data columns, implicit zeros elsewhere.
struct AlmostTriangular {
  std::size_t columns = 0;
  std::vector<OutBlock> blocks;

  std::size_t row_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.rows.rows();
    return n;
  }

  Matrix dense() const {
    Matrix out(row_count(), columns);
    std::size_t r = 0;
    for (const auto& b : blocks)
      for (std::size_t i = 0; i < b.rows.rows(); ++i, ++r) {
        auto src = b.rows.row(i);
        auto dst = out.row(r);
        std::copy(src.begin(), src.end(), dst.begin() + b.col_begin);
      }
    return out;
  }

  // Gram product without densifying: blocks contribute only inside
  // their own column span.
  Matrix gram_product() const {
    Matrix g(columns, columns);
    for (const auto& b : blocks) {
      const std::size_t w = b.rows.cols();
      for (std::size_t i = 0; i < b.rows.rows(); ++i) {
        auto row = b.rows.row(i);
        for (std::size_t j = 0; j < w; ++j) {
          if (row[j] == 0.0) continue;
          for (std::size_t k = 0; k < w; ++k)
            g(b.col_begin + j, b.col_begin + k) += row[j] * row[k];
        }
      }
    }
    return g;
  }
};

// Per-node state threaded through the recursion: the emitted blocks,
// one summary row per key, and the scale carried by each row. After a
// non-root node finishes, keys are the attributes shared with the
// parent and there is exactly one row per distinct value of them.
struct FigaroState {
  std::vector<OutBlock> out;
  std::vector<KeyTuple> keys;
  Matrix data;                 // keys.size() x subtree width
  std::vector<double> scales;  // aligned with keys, strictly positive
  std::map<KeyTuple, std::size_t> key_index;

  void rebuild_index() {
    key_index.clear();
    for (std::size_t i = 0; i < keys.size(); ++i) key_index.emplace(keys[i], i);
  }
};

namespace detail {

inline std::uint64_t count_at(const CountMap& m, const KeyTuple& key,
                              const std::string& what) {
  auto it = m.find(key);
  if (it == m.end() || it->second == 0)
    throw integrity_error(what + ": no count for key " + to_string(key) +
                          "; is the database fully reduced?");
  return it->second;
}

// Heads and tails of one relation, grouped by its key columns. Tails
// are scaled by sqrt(phi_circ) and emitted; heads and group sizes seed
// the summary rows.
inline void heads_and_tails(const Relation& rel, const NodeCounts& counts,
                            std::size_t subtree_width, std::size_t global_col,
                            unsigned threads, FigaroState& state) {
  const auto groups = rel.key_groups();
  const std::size_t nk = groups.size();
  const std::size_t own_width = rel.data_attrs.size();

  state.keys.resize(nk);
  state.data.resize(nk, subtree_width);
  state.scales.assign(nk, 1.0);

  // Output slots are preassigned so the parallel fill is reproducible
  // for any thread count.
  std::vector<std::ptrdiff_t> block_of(nk, -1);
  for (std::size_t k = 0; k < nk; ++k) {
    const std::size_t m = groups[k].second - groups[k].first;
    if (m > 1 && own_width > 0) {
      block_of[k] = static_cast<std::ptrdiff_t>(state.out.size());
      state.out.push_back(
          {-1, global_col, Matrix(m - 1, own_width)});
    }
  }

  parallel_for(nk, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto [row_begin, row_end] = groups[k];
      const std::size_t m = row_end - row_begin;
      state.keys[k] = rel.keys[row_begin];
      state.scales[k] = std::sqrt(static_cast<double>(m));

      Matrix group(m, own_width);
      for (std::size_t r = 0; r < m; ++r) {
        auto src = rel.data.row(row_begin + r);
        std::copy(src.begin(), src.end(), group.row(r).begin());
      }
      if (own_width > 0) {
        auto h = head(group);
        std::copy(h.begin(), h.end(), state.data.row(k).begin());
      }
      if (block_of[k] >= 0) {
        const double scale = std::sqrt(static_cast<double>(detail::count_at(
            counts.phi_circ, state.keys[k], "heads_and_tails")));
        Matrix t = tail(group);
        auto& block = state.out[static_cast<std::size_t>(block_of[k])].rows;
        for (std::size_t r = 0; r < t.rows(); ++r)
          for (std::size_t c = 0; c < own_width; ++c)
            block(r, c) = t(r, c) * scale;
      }
    }
  });
}

}  // namespace detail

// Runs the recursion rooted at `node` and returns its state. At the
// root the final summary rows are appended to the emitted blocks, so
// state.out is the complete almost-triangular result.
inline FigaroState figaro(const std::vector<Relation>& relations,
                          const JoinTree& tree, const Layout& layout,
                          const CountTables& counts, int node,
                          unsigned threads = default_thread_count()) {
  const Relation& rel = relations[node];
  const std::size_t sub_begin = layout.subtree_begin[node];
  const std::size_t width = layout.subtree_end[node] - sub_begin;

  FigaroState state;
  detail::heads_and_tails(rel, counts.node[node], width,
                          layout.node_offset[node], threads, state);
  for (auto& b : state.out) b.node = node;

  if (!tree.is_leaf(node)) {
    // process_and_join_children: recurse, concatenate outputs, join the
    // child summaries and push scales across columns.
    std::vector<FigaroState> child_states;
    child_states.reserve(tree.nodes[node].children.size());
    for (int c : tree.nodes[node].children) {
      child_states.push_back(
          figaro(relations, tree, layout, counts, c, threads));
      for (auto& b : child_states.back().out)
        state.out.push_back(std::move(b));
      child_states.back().out.clear();
      child_states.back().rebuild_index();
    }

    const auto& children = tree.nodes[node].children;
    const std::size_t nk = state.keys.size();
    const std::size_t own_width = rel.data_attrs.size();
    parallel_for(nk, threads, [&](std::size_t begin, std::size_t end) {
      std::vector<std::size_t> child_row(children.size());
      std::vector<double> child_scale(children.size());
      for (std::size_t k = begin; k < end; ++k) {
        for (std::size_t ci = 0; ci < children.size(); ++ci) {
          const int c = children[ci];
          KeyTuple xc = project_key(state.keys[k], rel.key_attrs,
                                    tree.nodes[c].parent_attrs);
          auto it = child_states[ci].key_index.find(xc);
          if (it == child_states[ci].key_index.end())
            throw integrity_error("figaro: key " + to_string(xc) + " of " +
                                  rel.name + " has no summary row in child " +
                                  relations[c].name +
                                  "; is the database fully reduced?");
          child_row[ci] = it->second;
          child_scale[ci] = child_states[ci].scales[it->second];
        }
        double all = 1.0;
        for (double s : child_scale) all *= s;

        auto dst = state.data.row(k);
        for (std::size_t ci = 0; ci < children.size(); ++ci) {
          double factor = state.scales[k];
          for (std::size_t cj = 0; cj < children.size(); ++cj)
            if (cj != ci) factor *= child_scale[cj];
          const int c = children[ci];
          const std::size_t local = layout.subtree_begin[c] - sub_begin;
          auto src = child_states[ci].data.row(child_row[ci]);
          for (std::size_t j = 0; j < src.size(); ++j)
            dst[local + j] = src[j] * factor;
        }
        for (std::size_t j = 0; j < own_width; ++j) dst[j] *= all;
        state.scales[k] *= all;
      }
    });

    if (!tree.is_root(node)) {
      // project_away_join_attributes: aggregate the summary rows down
      // to one per value of the parent-shared attributes.
      const auto& pattrs = tree.nodes[node].parent_attrs;
      std::map<KeyTuple, std::vector<std::size_t>> by_parent_key;
      for (std::size_t k = 0; k < nk; ++k)
        by_parent_key[project_key(state.keys[k], rel.key_attrs, pattrs)]
            .push_back(k);

      const std::size_t np = by_parent_key.size();
      std::vector<const std::vector<std::size_t>*> group_rows(np);
      std::vector<KeyTuple> new_keys(np);
      {
        std::size_t g = 0;
        for (auto& [key, rows] : by_parent_key) {
          new_keys[g] = key;
          group_rows[g] = &rows;
          ++g;
        }
      }
      Matrix new_data(np, width);
      std::vector<double> new_scales(np, 1.0);
      std::vector<std::ptrdiff_t> block_of(np, -1);
      for (std::size_t g = 0; g < np; ++g)
        if (group_rows[g]->size() > 1 && width > 0) {
          block_of[g] = static_cast<std::ptrdiff_t>(state.out.size());
          state.out.push_back(
              {node, sub_begin, Matrix(group_rows[g]->size() - 1, width)});
        }

      const NodeCounts& nc = counts.node[node];
      parallel_for(np, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t g = begin; g < end; ++g) {
          const auto& rows = *group_rows[g];
          Matrix stacked(rows.size(), width);
          std::vector<double> weights(rows.size());
          for (std::size_t r = 0; r < rows.size(); ++r) {
            auto src = state.data.row(rows[r]);
            std::copy(src.begin(), src.end(), stacked.row(r).begin());
            weights[r] = state.scales[rows[r]];
          }
          auto h = generalized_head(stacked, weights);
          std::copy(h.begin(), h.end(), new_data.row(g).begin());
          new_scales[g] = std::sqrt(static_cast<double>(detail::count_at(
              nc.phi_down, new_keys[g], "project_away (phi_down)")));
          if (block_of[g] >= 0) {
            const double scale = std::sqrt(static_cast<double>(
                detail::count_at(nc.phi_up, new_keys[g],
                                 "project_away (phi_up)")));
            Matrix t = generalized_tail(stacked, weights);
            auto& block =
                state.out[static_cast<std::size_t>(block_of[g])].rows;
            for (std::size_t r = 0; r < t.rows(); ++r)
              for (std::size_t c = 0; c < width; ++c)
                block(r, c) = t(r, c) * scale;
          }
        }
      });

      state.keys = std::move(new_keys);
      state.data = std::move(new_data);
      state.scales = std::move(new_scales);
    }
  }

  if (tree.is_root(node)) {
    if (width > 0 && state.data.rows() > 0) {
      OutBlock final_block{node, sub_begin, Matrix(state.data.rows(), width)};
      for (std::size_t r = 0; r < state.data.rows(); ++r) {
        auto src = state.data.row(r);
        std::copy(src.begin(), src.end(), final_block.rows.row(r).begin());
      }
      state.out.push_back(std::move(final_block));
    }
  } else if (tree.is_leaf(node)) {
    // Leaf summaries are looked up by the parent-shared attributes,
    // which for a leaf are its own keys up to column order.
    const auto& pattrs = tree.nodes[node].parent_attrs;
    if (pattrs != rel.key_attrs)
      for (auto& k : state.keys)
        k = project_key(k, rel.key_attrs, pattrs);
  }
  state.rebuild_index();
  return state;
}

// Whole-tree convenience wrapper producing the stacked result.
inline AlmostTriangular figaro_r0(const std::vector<Relation>& relations,
                                  const JoinTree& tree, const Layout& layout,
                                  const CountTables& counts,
                                  unsigned threads = default_thread_count()) {
  FigaroState state =
      figaro(relations, tree, layout, counts, tree.root, threads);
  AlmostTriangular r0;
  r0.columns = layout.total;
  r0.blocks = std::move(state.out);
  return r0;
}

}  // namespace figaro
