#pragma once

// Full reducer: one bottom-up and one top-down semi-join sweep. After
// it, every remaining tuple participates in at least one join result.

#include <set>
#include <string>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/relation.hpp"

namespace figaro {

namespace detail {

// Keeps only rows of `rel` whose projection onto `attrs` occurs among
// the projections of `other` onto the same attrs. Row order preserved.
inline void semi_join(Relation& rel, const Relation& other,
                      const std::vector<std::string>& attrs) {
  if (attrs.empty()) return;  // Cartesian edge filters nothing
  std::set<KeyTuple> present;
  for (const auto& k : other.keys)
    present.insert(project_key(k, other.key_attrs, attrs));

  std::vector<KeyTuple> keys;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rel.row_count(); ++i)
    if (present.count(project_key(rel.keys[i], rel.key_attrs, attrs)))
      keep.push_back(i);
  if (keep.size() == rel.row_count()) return;

  Matrix data(keep.size(), rel.data_attrs.size());
  keys.reserve(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    keys.push_back(std::move(rel.keys[keep[i]]));
    auto src = rel.data.row(keep[i]);
    std::copy(src.begin(), src.end(), data.row(i).begin());
  }
  rel.keys = std::move(keys);
  rel.data = std::move(data);
}

}  // namespace detail

inline std::vector<Relation> semi_join_reduce(std::vector<Relation> relations,
                                              const JoinTree& tree) {
  auto check_nonempty = [&](int node) {
    if (relations[node].row_count() == 0)
      throw empty_join_error("relation " + relations[node].name +
                             " reduced to empty: the join result is empty");
  };
  for (int i : tree.preorder) check_nonempty(i);

  // Bottom-up: parents drop rows with no match in any child subtree.
  for (auto it = tree.preorder.rbegin(); it != tree.preorder.rend(); ++it) {
    const int i = *it;
    for (int c : tree.nodes[i].children) {
      detail::semi_join(relations[i], relations[c],
                        tree.nodes[c].parent_attrs);
      check_nonempty(i);
    }
  }
  // Top-down: children drop rows with no match in the parent.
  for (int i : tree.preorder) {
    for (int c : tree.nodes[i].children) {
      detail::semi_join(relations[c], relations[i],
                        tree.nodes[c].parent_attrs);
      check_nonempty(c);
    }
  }
  return relations;
}

}  // namespace figaro
