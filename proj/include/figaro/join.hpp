#pragma once

// Join materialization and row streaming. These exist for oracles and
// for recovering Q; the main pipeline never materializes the join.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/matrix.hpp"
#include "figaro/relation.hpp"

namespace figaro {

inline constexpr std::uint64_t kDefaultJoinCap = 1'000'000;

namespace detail {

// Per-node index from parent-edge key projection to matching row ids.
struct EdgeIndex {
  std::vector<std::map<KeyTuple, std::vector<std::size_t>>> by_node;

  EdgeIndex(const std::vector<Relation>& relations, const JoinTree& tree) {
    by_node.resize(relations.size());
    for (int i : tree.preorder) {
      if (tree.is_root(i)) continue;
      const auto& rel = relations[i];
      const auto& attrs = tree.nodes[i].parent_attrs;
      auto& index = by_node[i];
      for (std::size_t row = 0; row < rel.row_count(); ++row)
        index[project_key(rel.keys[row], rel.key_attrs, attrs)].push_back(row);
    }
  }
};

}  // namespace detail

// Enumerates the data rows of the join in a fixed depth-first order,
// laid out per the pre-order column layout. Returns the number of rows.
// With an empty sink only counts, skipping all data movement.
inline std::uint64_t for_each_join_row(
    const std::vector<Relation>& relations, const JoinTree& tree,
    const Layout& layout,
    const std::function<void(std::span<const double>)>& sink,
    std::uint64_t cap = kDefaultJoinCap) {
  detail::EdgeIndex index(relations, tree);
  std::vector<double> row(layout.total, 0.0);
  std::vector<std::size_t> current_row(relations.size(), 0);
  std::uint64_t produced = 0;
  const bool fill = static_cast<bool>(sink);

  auto emit = [&](auto&& self, std::size_t depth) -> void {
    if (depth == tree.preorder.size()) {
      if (++produced > cap)
        throw size_error("join row cap exceeded (" + std::to_string(cap) +
                         " rows)");
      if (fill) sink(row);
      return;
    }
    const int node = tree.preorder[depth];
    const auto& rel = relations[node];
    const std::size_t off = layout.node_offset[node];
    auto descend = [&](std::size_t r) {
      current_row[node] = r;
      if (fill) {
        auto src = rel.data.row(r);
        std::copy(src.begin(), src.end(), row.begin() + off);
      }
      self(self, depth + 1);
    };
    if (tree.is_root(node)) {
      for (std::size_t r = 0; r < rel.row_count(); ++r) descend(r);
      return;
    }
    const int parent = tree.nodes[node].parent;
    const auto& rel_p = relations[parent];
    KeyTuple probe =
        project_key(rel_p.keys[current_row[parent]], rel_p.key_attrs,
                    tree.nodes[node].parent_attrs);
    auto it = index.by_node[node].find(probe);
    if (it == index.by_node[node].end()) return;  // dangling parent tuple
    for (std::size_t r : it->second) descend(r);
  };
  emit(emit, 0);
  return produced;
}

// Dense join output over the data columns. Counts first so the result
// is allocated exactly once.
inline Matrix materialize_join(const std::vector<Relation>& relations,
                               const JoinTree& tree, const Layout& layout,
                               std::uint64_t cap = kDefaultJoinCap) {
  const std::uint64_t n =
      for_each_join_row(relations, tree, layout, nullptr, cap);
  Matrix a(static_cast<std::size_t>(n), layout.total);
  std::size_t next = 0;
  for_each_join_row(
      relations, tree, layout,
      [&](std::span<const double> r) {
        std::copy(r.begin(), r.end(), a.row(next).begin());
        ++next;
      },
      cap);
  return a;
}

inline Matrix materialize_join(const std::vector<Relation>& relations,
                               const JoinTree& tree,
                               std::uint64_t cap = kDefaultJoinCap) {
  return materialize_join(relations, tree, make_layout(relations, tree), cap);
}

}  // namespace figaro
