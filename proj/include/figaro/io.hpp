#pragma once

// CSV writers for the triangular factor and the debug dumps.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "figaro/counts.hpp"
#include "figaro/figaro.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/matrix.hpp"
#include "figaro/postprocess.hpp"

namespace figaro {

// 17 significant digits round-trip any double exactly.
inline std::string format_value(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_header(std::ostream& out,
                         const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out << ',';
    out << names[i];
  }
  out << '\n';
}

// N header names, then N rows; the strict lower triangle is a literal 0.
inline void write_triangular_csv(std::ostream& out,
                                 const TriangularFactor& f) {
  write_header(out, f.column_names);
  const std::size_t n = f.r.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) out << ',';
      if (j < i)
        out << '0';
      else
        out << format_value(f.r(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m,
                             const std::vector<std::string>& names = {}) {
  if (!names.empty()) write_header(out, names);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_value(row[j]);
    }
    out << '\n';
  }
}

// One line per node and distinct key: node,key,phi_down,phi_up,phi_circ.
// The root has no parent-shared attributes, so those cells stay empty.
inline void write_counts_csv(std::ostream& out,
                             const std::vector<Relation>& relations,
                             const JoinTree& tree,
                             const CountTables& counts) {
  out << "node,key,phi_down,phi_up,phi_circ\n";
  for (int i : tree.preorder) {
    const auto& nc = counts.node[i];
    for (const auto& [key, circ] : nc.phi_circ) {
      out << relations[i].name << ',' << to_string(key) << ',';
      if (!tree.is_root(i)) {
        KeyTuple xp = project_key(key, relations[i].key_attrs,
                                  tree.nodes[i].parent_attrs);
        out << nc.phi_down.at(xp) << ',' << nc.phi_up.at(xp);
      } else {
        out << ',';
      }
      out << ',' << circ << '\n';
    }
  }
}

}  // namespace figaro
