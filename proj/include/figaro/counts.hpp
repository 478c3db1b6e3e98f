#pragma once

// Group-by count aggregates that become the scaling factors of the
// main transform. One bottom-up pass computes the subtree counts, one
// top-down pass the complement counts; each relation's rows are
// scanned once, everything else works off the per-key maps.

#include <atomic>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/parallel.hpp"
#include "figaro/relation.hpp"

namespace figaro {

using CountMap = std::map<KeyTuple, std::uint64_t>;

struct NodeCounts {
  CountMap rows_per_key;    // by the node's own key attributes
  CountMap theta_down;      // subtree join size, by own keys
  CountMap full_join_size;  // whole join size, by own keys
  CountMap phi_circ;        // join of all other relations, by own keys
  CountMap phi_down;        // subtree join size, by parent-shared keys
  CountMap phi_up;          // non-subtree join size, by parent-shared keys
};

struct CountTables {
  std::vector<NodeCounts> node;
  // Row-stream passes over each relation, for verifying the two-pass bound.
  std::vector<unsigned> scans;

  std::uint64_t total_join_size(int root) const {
    std::uint64_t total = 0;
    for (const auto& [key, n] : node[root].full_join_size) total += n;
    return total;
  }
};

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r))
    throw size_error("count aggregate overflow (64-bit)");
  return r;
}

inline void checked_atomic_add(std::uint64_t& slot, std::uint64_t delta) {
  std::atomic_ref<std::uint64_t> ref(slot);
  std::uint64_t cur = ref.load(std::memory_order_relaxed);
  std::uint64_t next;
  do {
    if (__builtin_add_overflow(cur, delta, &next))
      throw size_error("count aggregate overflow (64-bit)");
  } while (!ref.compare_exchange_weak(cur, next, std::memory_order_relaxed));
}

inline std::uint64_t exact_div(std::uint64_t num, std::uint64_t den,
                               const char* what) {
  if (den == 0 || num % den != 0)
    throw integrity_error(std::string(what) +
                          ": counts are inconsistent; is the database fully "
                          "reduced?");
  return num / den;
}

// Distinct keys of a relation in row order, plus group sizes. The one
// place that scans relation rows.
struct KeyGroups {
  std::vector<KeyTuple> keys;
  std::vector<std::uint64_t> sizes;
};

inline KeyGroups scan_key_groups(const Relation& rel, unsigned& scan_counter) {
  ++scan_counter;
  KeyGroups g;
  for (auto [begin, end] : rel.key_groups()) {
    g.keys.push_back(rel.keys[begin]);
    g.sizes.push_back(end - begin);
  }
  return g;
}

}  // namespace detail

inline CountTables compute_counts(const std::vector<Relation>& relations,
                                  const JoinTree& tree,
                                  unsigned threads = default_thread_count()) {
  const std::size_t r = relations.size();
  CountTables tables;
  tables.node.resize(r);
  tables.scans.assign(r, 0);

  // Distinct keys per node in map order, reused by both passes so the
  // relations are scanned exactly once.
  std::vector<detail::KeyGroups> groups(r);
  // Pointers into the phi maps, aligned with groups[i].keys, so the
  // per-key loops can run in parallel and accumulate with atomics.
  std::vector<std::vector<std::uint64_t*>> phi_down_slot(r), theta_slot(r),
      fjs_slot(r), circ_slot(r);
  std::vector<std::vector<std::vector<std::uint64_t*>>> child_up_slot(r);

  // Bottom-up: theta_down (by own keys) and phi_down (by parent keys).
  for (auto it = tree.preorder.rbegin(); it != tree.preorder.rend(); ++it) {
    const int i = *it;
    auto& nc = tables.node[i];
    groups[i] = detail::scan_key_groups(relations[i], tables.scans[i]);
    const auto& keys = groups[i].keys;
    const std::size_t nk = keys.size();

    for (std::size_t k = 0; k < nk; ++k)
      nc.rows_per_key.emplace(keys[k], groups[i].sizes[k]);
    for (std::size_t k = 0; k < nk; ++k) nc.theta_down.emplace(keys[k], 0);
    theta_slot[i].resize(nk);
    {
      std::size_t k = 0;
      for (auto& [key, value] : nc.theta_down) theta_slot[i][k++] = &value;
    }
    if (!tree.is_root(i)) {
      for (std::size_t k = 0; k < nk; ++k)
        nc.phi_down.emplace(project_key(keys[k], relations[i].key_attrs,
                                        tree.nodes[i].parent_attrs),
                            0);
      phi_down_slot[i].resize(nk);
      for (std::size_t k = 0; k < nk; ++k)
        phi_down_slot[i][k] = &nc.phi_down.at(project_key(
            keys[k], relations[i].key_attrs, tree.nodes[i].parent_attrs));
    }

    const auto& children = tree.nodes[i].children;
    parallel_for(nk, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        std::uint64_t theta = groups[i].sizes[k];
        for (int c : children) {
          KeyTuple xc = project_key(keys[k], relations[i].key_attrs,
                                    tree.nodes[c].parent_attrs);
          auto f = tables.node[c].phi_down.find(xc);
          if (f == tables.node[c].phi_down.end())
            throw integrity_error(
                "compute_counts: key " + to_string(xc) + " of " +
                relations[i].name + " has no match in child " +
                relations[c].name + "; is the database fully reduced?");
          theta = detail::checked_mul(theta, f->second);
        }
        *theta_slot[i][k] = theta;
        if (!tree.is_root(i))
          detail::checked_atomic_add(*phi_down_slot[i][k], theta);
      }
    });
  }

  // Top-down: full_join_size, phi_up, phi_circ. The division of a
  // child's phi_up by its phi_down happens just before recursing.
  auto pass2 = [&](auto&& self, int i) -> void {
    auto& nc = tables.node[i];
    const auto& keys = groups[i].keys;
    const std::size_t nk = keys.size();
    const auto& children = tree.nodes[i].children;

    for (std::size_t k = 0; k < nk; ++k) nc.full_join_size.emplace(keys[k], 0);
    for (std::size_t k = 0; k < nk; ++k) nc.phi_circ.emplace(keys[k], 0);
    fjs_slot[i].resize(nk);
    circ_slot[i].resize(nk);
    {
      std::size_t k = 0;
      for (auto& [key, value] : nc.full_join_size) fjs_slot[i][k++] = &value;
      k = 0;
      for (auto& [key, value] : nc.phi_circ) circ_slot[i][k++] = &value;
    }
    child_up_slot[i].assign(children.size(), {});
    for (std::size_t ci = 0; ci < children.size(); ++ci) {
      const int c = children[ci];
      auto& up = tables.node[c].phi_up;
      for (std::size_t k = 0; k < nk; ++k)
        up.emplace(project_key(keys[k], relations[i].key_attrs,
                               tree.nodes[c].parent_attrs),
                   0);
      child_up_slot[i][ci].resize(nk);
      for (std::size_t k = 0; k < nk; ++k)
        child_up_slot[i][ci][k] = &up.at(project_key(
            keys[k], relations[i].key_attrs, tree.nodes[c].parent_attrs));
    }

    parallel_for(nk, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        std::uint64_t up_count = 1;
        if (!tree.is_root(i)) {
          KeyTuple xp = project_key(keys[k], relations[i].key_attrs,
                                    tree.nodes[i].parent_attrs);
          up_count = nc.phi_up.at(xp);
        }
        const std::uint64_t fjs =
            detail::checked_mul(nc.theta_down.at(keys[k]), up_count);
        *fjs_slot[i][k] = fjs;
        for (std::size_t ci = 0; ci < children.size(); ++ci)
          detail::checked_atomic_add(*child_up_slot[i][ci][k], fjs);
        *circ_slot[i][k] = detail::exact_div(fjs, groups[i].sizes[k],
                                             "compute_counts: phi_circ");
      }
    });

    for (int c : children) {
      auto& up = tables.node[c].phi_up;
      const auto& down = tables.node[c].phi_down;
      if (up.size() != down.size())
        throw integrity_error("compute_counts: child " + relations[c].name +
                              " has keys unmatched in " + relations[i].name +
                              "; is the database fully reduced?");
      for (auto& [key, value] : up)
        value = detail::exact_div(value, down.at(key),
                                  "compute_counts: phi_up");
      self(self, c);
    }
  };
  pass2(pass2, tree.root);

  return tables;
}

// ---------------------------------------------------------------------------
// Brute-force oracle: evaluates every aggregate by materializing the
// relevant sub-join (keys only, bag semantics) and counting groups.
// Missing groups come back as 0, which is how unreduced inputs show up.

namespace detail {

struct KeyBag {
  std::vector<std::string> attrs;
  std::vector<KeyTuple> rows;
};

inline KeyBag key_bag(const Relation& rel) {
  return {rel.key_attrs, rel.keys};
}

inline KeyBag bag_join_pair(const KeyBag& a, const KeyBag& b,
                            std::uint64_t cap) {
  std::vector<std::string> shared, fresh;
  for (const auto& attr : b.attrs) {
    if (std::find(a.attrs.begin(), a.attrs.end(), attr) != a.attrs.end())
      shared.push_back(attr);
    else
      fresh.push_back(attr);
  }
  std::map<KeyTuple, std::vector<std::size_t>> index;
  for (std::size_t i = 0; i < b.rows.size(); ++i)
    index[project_key(b.rows[i], b.attrs, shared)].push_back(i);

  KeyBag out;
  out.attrs = a.attrs;
  out.attrs.insert(out.attrs.end(), fresh.begin(), fresh.end());
  for (const auto& row : a.rows) {
    auto it = index.find(project_key(row, a.attrs, shared));
    if (it == index.end()) continue;
    for (std::size_t i : it->second) {
      if (out.rows.size() >= cap)
        throw size_error("brute-force join cap exceeded");
      KeyTuple combined = row;
      for (const auto& v : project_key(b.rows[i], b.attrs, fresh))
        combined.push_back(v);
      out.rows.push_back(std::move(combined));
    }
  }
  return out;
}

// Natural join of a set of relations, keys only. Joins connected
// pieces first so Cartesian blow-ups only happen when forced.
inline KeyBag bag_join(const std::vector<const Relation*>& rels,
                       std::uint64_t cap) {
  if (rels.empty()) return {{}, {KeyTuple{}}};  // unit: one empty row
  std::vector<KeyBag> pending;
  pending.reserve(rels.size());
  for (const Relation* r : rels) pending.push_back(key_bag(*r));
  KeyBag acc = std::move(pending.front());
  pending.erase(pending.begin());
  while (!pending.empty()) {
    std::size_t pick = 0;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      bool connected = false;
      for (const auto& attr : pending[i].attrs)
        if (std::find(acc.attrs.begin(), acc.attrs.end(), attr) !=
            acc.attrs.end())
          connected = true;
      if (connected) {
        pick = i;
        break;
      }
    }
    acc = bag_join_pair(acc, pending[pick], cap);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return acc;
}

inline CountMap group_count(const KeyBag& bag,
                            const std::vector<std::string>& attrs) {
  CountMap counts;
  for (const auto& row : bag.rows)
    ++counts[project_key(row, bag.attrs, attrs)];
  return counts;
}

// Restricts a grouped count to the given keys; absent groups become 0.
inline CountMap take_at(const CountMap& counts,
                        const std::set<KeyTuple>& keys) {
  CountMap out;
  for (const auto& k : keys) {
    auto it = counts.find(k);
    out.emplace(k, it == counts.end() ? 0 : it->second);
  }
  return out;
}

}  // namespace detail

inline CountTables brute_force_counts(const std::vector<Relation>& relations,
                                      const JoinTree& tree,
                                      std::uint64_t cap = 5'000'000) {
  const std::size_t r = relations.size();
  CountTables tables;
  tables.node.resize(r);
  tables.scans.assign(r, 0);

  std::vector<std::vector<int>> subtree(r);
  auto collect = [&](auto&& self, int node) -> void {
    subtree[node].push_back(node);
    for (int c : tree.nodes[node].children) {
      self(self, c);
      subtree[node].insert(subtree[node].end(), subtree[c].begin(),
                           subtree[c].end());
    }
  };
  collect(collect, tree.root);

  auto rels_from = [&](const std::vector<int>& ids) {
    std::vector<const Relation*> out;
    for (int i : ids) out.push_back(&relations[i]);
    return out;
  };
  auto complement_of = [&](const std::vector<int>& ids) {
    std::set<int> in(ids.begin(), ids.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < r; ++i)
      if (!in.count(static_cast<int>(i))) out.push_back(static_cast<int>(i));
    return out;
  };

  detail::KeyBag full = detail::bag_join(rels_from(subtree[tree.root]), cap);

  for (std::size_t i = 0; i < r; ++i) {
    auto& nc = tables.node[static_cast<int>(i)];
    const auto& rel = relations[i];
    std::set<KeyTuple> own_keys(rel.keys.begin(), rel.keys.end());
    for (const auto& k : own_keys)
      nc.rows_per_key.emplace(
          k, std::count(rel.keys.begin(), rel.keys.end(), k));

    detail::KeyBag sub =
        detail::bag_join(rels_from(subtree[static_cast<int>(i)]), cap);
    nc.theta_down =
        detail::take_at(detail::group_count(sub, rel.key_attrs), own_keys);
    nc.full_join_size =
        detail::take_at(detail::group_count(full, rel.key_attrs), own_keys);

    std::vector<int> others = complement_of({static_cast<int>(i)});
    if (others.empty()) {
      for (const auto& k : own_keys) nc.phi_circ.emplace(k, 1);
    } else {
      detail::KeyBag rest = detail::bag_join(rels_from(others), cap);
      nc.phi_circ =
          detail::take_at(detail::group_count(rest, rel.key_attrs), own_keys);
    }

    if (!tree.is_root(static_cast<int>(i))) {
      const auto& pattrs = tree.nodes[i].parent_attrs;
      std::set<KeyTuple> parent_keys;
      for (const auto& k : rel.keys)
        parent_keys.insert(project_key(k, rel.key_attrs, pattrs));
      nc.phi_down =
          detail::take_at(detail::group_count(sub, pattrs), parent_keys);
      detail::KeyBag above = detail::bag_join(
          rels_from(complement_of(subtree[static_cast<int>(i)])), cap);
      nc.phi_up =
          detail::take_at(detail::group_count(above, pattrs), parent_keys);
    }
  }
  return tables;
}

}  // namespace figaro
