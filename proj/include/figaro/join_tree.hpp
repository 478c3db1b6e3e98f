#pragma once

// Join tree representation, the term-notation config format, tree
// validation (path property), and the global data-column layout.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/relation.hpp"

namespace figaro {

// Rooted tree over the relations of a database. Node indices are
// relation indices. parent_attrs of a node are the key attributes it
// shares with its parent, sorted by name; projections between nodes
// always use this sorted order so tuples compare consistently.
struct JoinTree {
  struct Node {
    int parent = -1;
    std::vector<int> children;
    std::vector<std::string> parent_attrs;
  };
  int root = 0;
  std::vector<Node> nodes;
  std::vector<int> preorder;

  bool is_leaf(int i) const { return nodes[i].children.empty(); }
  bool is_root(int i) const { return i == root; }
};

namespace detail {

inline std::vector<std::string> sorted_shared_keys(const Relation& a,
                                                   const Relation& b) {
  std::set<std::string> ka(a.key_attrs.begin(), a.key_attrs.end());
  std::vector<std::string> shared;
  for (const auto& k : b.key_attrs)
    if (ka.count(k)) shared.push_back(k);
  std::sort(shared.begin(), shared.end());
  return shared;
}

inline void preorder_walk(const JoinTree& tree, int node,
                          std::vector<int>& out) {
  out.push_back(node);
  for (int c : tree.nodes[node].children) preorder_walk(tree, c, out);
}

}  // namespace detail

// Projects a key tuple onto a subset of attributes. from_attrs gives
// the attribute order of `key`; to_attrs must all occur in from_attrs.
inline KeyTuple project_key(const KeyTuple& key,
                            const std::vector<std::string>& from_attrs,
                            const std::vector<std::string>& to_attrs) {
  KeyTuple out;
  out.reserve(to_attrs.size());
  for (const auto& a : to_attrs) {
    auto it = std::find(from_attrs.begin(), from_attrs.end(), a);
    if (it == from_attrs.end())
      throw integrity_error("projection: attribute '" + a +
                            "' not present in source tuple");
    out.push_back(key[static_cast<std::size_t>(it - from_attrs.begin())]);
  }
  return out;
}

inline JoinTree build_join_tree(const std::vector<Relation>& relations,
                                int root, const std::vector<int>& parent) {
  if (relations.empty()) throw tree_error("join tree: no relations");
  JoinTree tree;
  tree.root = root;
  tree.nodes.resize(relations.size());
  for (std::size_t i = 0; i < relations.size(); ++i) {
    int p = parent[i];
    tree.nodes[i].parent = p;
    if (static_cast<int>(i) == root) {
      if (p != -1) throw tree_error("join tree: root cannot have a parent");
      continue;
    }
    if (p < 0 || p >= static_cast<int>(relations.size()))
      throw tree_error("join tree: bad parent index for node " +
                       relations[i].name);
    tree.nodes[p].children.push_back(static_cast<int>(i));
    // May be empty: an edge with no shared keys is a Cartesian product.
    tree.nodes[i].parent_attrs =
        detail::sorted_shared_keys(relations[p], relations[i]);
  }
  detail::preorder_walk(tree, root, tree.preorder);
  if (tree.preorder.size() != relations.size())
    throw tree_error("join tree: not a connected tree");
  return tree;
}

// Checks the join-tree path property: any two relations sharing a key
// attribute must be connected by a path whose every node also carries
// that attribute. Additionally every key attribute must be shared with
// at least one other relation (when there are two or more), so that
// grouping structure lines up between neighbours.
inline void validate_join_tree(const std::vector<Relation>& relations,
                               const JoinTree& tree) {
  const std::size_t r = relations.size();
  if (r <= 1) return;

  // Node path i -> j through the tree, for error reporting.
  auto path_between = [&](int a, int b) {
    std::vector<int> up_a, up_b;
    for (int x = a; x != -1; x = tree.nodes[x].parent) up_a.push_back(x);
    for (int x = b; x != -1; x = tree.nodes[x].parent) up_b.push_back(x);
    std::set<int> anc(up_a.begin(), up_a.end());
    int meet = -1;
    for (int x : up_b)
      if (anc.count(x)) {
        meet = x;
        break;
      }
    std::vector<int> path;
    for (int x : up_a) {
      path.push_back(x);
      if (x == meet) break;
    }
    std::vector<int> down;
    for (int x : up_b) {
      if (x == meet) break;
      down.push_back(x);
    }
    path.insert(path.end(), down.rbegin(), down.rend());
    return path;
  };

  std::map<std::string, std::vector<int>> attr_nodes;
  for (std::size_t i = 0; i < r; ++i)
    for (const auto& a : relations[i].key_attrs)
      attr_nodes[a].push_back(static_cast<int>(i));

  for (const auto& [attr, nodes] : attr_nodes) {
    if (nodes.size() < 2) {
      throw tree_error("key attribute '" + attr + "' of relation " +
                       relations[nodes[0]].name +
                       " is not shared with any other relation");
    }
    for (std::size_t x = 0; x < nodes.size(); ++x)
      for (std::size_t y = x + 1; y < nodes.size(); ++y) {
        auto path = path_between(nodes[x], nodes[y]);
        for (int n : path) {
          const auto& ks = relations[n].key_attrs;
          if (std::find(ks.begin(), ks.end(), attr) == ks.end()) {
            std::string p;
            for (int q : path) {
              if (!p.empty()) p += " - ";
              p += relations[q].name;
            }
            throw tree_error("path property violated for attribute '" + attr +
                             "': relation " + relations[n].name +
                             " on path " + p + " does not contain it");
          }
        }
      }
  }

  // Data attribute names must not collide with anything anywhere else;
  // the natural join would otherwise equate them.
  std::map<std::string, int> data_owner;
  for (std::size_t i = 0; i < r; ++i)
    for (const auto& a : relations[i].data_attrs) {
      auto [it, fresh] = data_owner.emplace(a, static_cast<int>(i));
      if (!fresh)
        throw schema_error("data attribute '" + a + "' appears in both " +
                           relations[it->second].name + " and " +
                           relations[i].name);
      if (attr_nodes.count(a))
        throw schema_error("attribute '" + a + "' is a data column of " +
                           relations[i].name +
                           " but a key column elsewhere");
    }
}

// Global layout of the data columns: depth-first pre-order over the
// tree, each relation's data attributes in declaration order. Every
// subtree then owns a contiguous column range with the node's own
// columns at the front.
struct Layout {
  std::size_t total = 0;
  std::vector<std::size_t> node_offset;    // first own column of node
  std::vector<std::size_t> node_width;     // |data_attrs|
  std::vector<std::size_t> subtree_begin;  // contiguous subtree span
  std::vector<std::size_t> subtree_end;
  std::vector<std::string> column_names;   // qualified relation.attr
};

inline Layout make_layout(const std::vector<Relation>& relations,
                          const JoinTree& tree) {
  Layout lay;
  lay.node_offset.resize(relations.size());
  lay.node_width.resize(relations.size());
  lay.subtree_begin.resize(relations.size());
  lay.subtree_end.resize(relations.size());
  for (int n : tree.preorder) {
    lay.node_offset[n] = lay.total;
    lay.node_width[n] = relations[n].data_attrs.size();
    for (const auto& a : relations[n].data_attrs)
      lay.column_names.push_back(relations[n].name + "." + a);
    lay.total += lay.node_width[n];
  }
  // Pre-order means a subtree's columns end where the walk leaves it.
  auto fill = [&](auto&& self, int node) -> std::size_t {
    lay.subtree_begin[node] = lay.node_offset[node];
    std::size_t end = lay.node_offset[node] + lay.node_width[node];
    for (int c : tree.nodes[node].children) end = self(self, c);
    lay.subtree_end[node] = end;
    return end;
  };
  fill(fill, tree.root);
  return lay;
}

// ---------------------------------------------------------------------------
// Config parsing.
//
//   relation <name> file=<path> keys=<a,b,...> data=<c,d,...>
//   tree <term>           with term := name | name(term, term, ...)
//
// Lines starting with '#' and blank lines are ignored.

struct TreeTerm {
  std::string name;
  std::vector<TreeTerm> children;
};

namespace detail {

struct TermParser {
  std::string_view s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw parse_error("tree term: " + what + " at offset " +
                      std::to_string(pos) + " in '" + std::string(s) + "'");
  }
  std::string ident() {
    skip_ws();
    std::size_t start = pos;
    while (pos < s.size() && s[pos] != '(' && s[pos] != ')' && s[pos] != ',' &&
           s[pos] != ' ' && s[pos] != '\t')
      ++pos;
    if (pos == start) fail("expected relation name");
    return std::string(s.substr(start, pos - start));
  }
  TreeTerm term() {
    TreeTerm t;
    t.name = ident();
    skip_ws();
    if (pos < s.size() && s[pos] == '(') {
      ++pos;
      while (true) {
        t.children.push_back(term());
        skip_ws();
        if (pos < s.size() && s[pos] == ',') {
          ++pos;
          continue;
        }
        if (pos < s.size() && s[pos] == ')') {
          ++pos;
          break;
        }
        fail("expected ',' or ')'");
      }
    }
    return t;
  }
};

}  // namespace detail

inline TreeTerm parse_tree_term(std::string_view text) {
  detail::TermParser p{text};
  TreeTerm t = p.term();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return t;
}

inline std::string to_term_string(const JoinTree& tree,
                                  const std::vector<Relation>& relations,
                                  int node) {
  std::string out = relations[node].name;
  if (!tree.nodes[node].children.empty()) {
    out += '(';
    bool first = true;
    for (int c : tree.nodes[node].children) {
      if (!first) out += ',';
      out += to_term_string(tree, relations, c);
      first = false;
    }
    out += ')';
  }
  return out;
}

// Builds and validates the tree described by a term over named relations.
inline JoinTree join_tree_from_term(const std::vector<Relation>& relations,
                                    const TreeTerm& term) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < relations.size(); ++i) {
    auto [it, fresh] = index.emplace(relations[i].name, static_cast<int>(i));
    if (!fresh)
      throw schema_error("duplicate relation name '" + relations[i].name + "'");
  }
  std::vector<int> parent(relations.size(), -2);
  auto resolve = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      throw tree_error("tree term names unknown relation '" + name + "'");
    return it->second;
  };
  auto walk = [&](auto&& self, const TreeTerm& t, int par) -> void {
    int node = resolve(t.name);
    if (parent[node] != -2)
      throw tree_error("relation '" + t.name + "' appears twice in the tree");
    parent[node] = par;
    for (const auto& c : t.children) self(self, c, node);
  };
  int root = resolve(term.name);
  walk(walk, term, -1);
  for (std::size_t i = 0; i < relations.size(); ++i)
    if (parent[i] == -2)
      throw tree_error("relation '" + relations[i].name +
                       "' missing from the tree term");
  JoinTree tree = build_join_tree(relations, root, parent);
  validate_join_tree(relations, tree);
  return tree;
}

struct RelationSpec {
  std::string name;
  std::string file;
  std::vector<std::string> keys;
  std::vector<std::string> data;
};

struct DatabaseConfig {
  std::vector<RelationSpec> relations;
  std::string tree_term;
};

namespace detail {

inline std::vector<std::string> split_names(std::string_view csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= csv.size(); ++i) {
    if (i == csv.size() || csv[i] == ',') {
      auto cell = trim(csv.substr(start, i - start));
      if (!cell.empty()) out.emplace_back(cell);
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

inline DatabaseConfig parse_config(std::istream& in) {
  DatabaseConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls{std::string(t)};
    std::string word;
    ls >> word;
    if (word == "relation") {
      RelationSpec spec;
      ls >> spec.name;
      if (spec.name.empty())
        throw parse_error("config line " + std::to_string(lineno) +
                          ": relation needs a name");
      std::string kv;
      while (ls >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw parse_error("config line " + std::to_string(lineno) +
                            ": expected key=value, got '" + kv + "'");
        std::string key = kv.substr(0, eq);
        std::string val = kv.substr(eq + 1);
        if (key == "file")
          spec.file = val;
        else if (key == "keys")
          spec.keys = detail::split_names(val);
        else if (key == "data")
          spec.data = detail::split_names(val);
        else
          throw parse_error("config line " + std::to_string(lineno) +
                            ": unknown option '" + key + "'");
      }
      if (spec.file.empty())
        throw parse_error("config line " + std::to_string(lineno) +
                          ": relation '" + spec.name + "' needs file=");
      cfg.relations.push_back(std::move(spec));
    } else if (word == "tree") {
      std::string rest;
      std::getline(ls, rest);
      cfg.tree_term = std::string(detail::trim(rest));
      if (cfg.tree_term.empty())
        throw parse_error("config line " + std::to_string(lineno) +
                          ": tree needs a term");
    } else {
      throw parse_error("config line " + std::to_string(lineno) +
                        ": unknown directive '" + word + "'");
    }
  }
  if (cfg.relations.empty()) throw parse_error("config: no relations");
  if (cfg.tree_term.empty()) throw parse_error("config: no tree directive");
  return cfg;
}

struct Database {
  std::vector<Relation> relations;
  JoinTree tree;
};

// Loads all CSVs named by a config and builds the validated tree.
// Relative file paths resolve against base_dir.
inline Database load_database(const DatabaseConfig& cfg,
                              const std::string& base_dir = "") {
  Database db;
  for (const auto& spec : cfg.relations) {
    std::string path = spec.file;
    if (!base_dir.empty() && !path.empty() && path.front() != '/')
      path = base_dir + "/" + path;
    db.relations.push_back(
        load_relation(path, spec.name, spec.keys, spec.data));
  }
  db.tree = join_tree_from_term(db.relations, parse_tree_term(cfg.tree_term));
  return db;
}

}  // namespace figaro
