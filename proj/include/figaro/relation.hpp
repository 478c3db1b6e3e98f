#pragma once

// Relation storage and CSV ingestion. Rows are kept sorted by the full
// (key, data) tuple so that loading any permutation of the same file
// produces an identical relation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "figaro/error.hpp"
#include "figaro/matrix.hpp"

namespace figaro {

// Ordered, hash-free join key value. A key column holds either all
// integers or all strings; mixed columns are rejected at load time.
using KeyValue = std::variant<std::int64_t, std::string>;
using KeyTuple = std::vector<KeyValue>;

inline std::string to_string(const KeyValue& k) {
  if (std::holds_alternative<std::int64_t>(k))
    return std::to_string(std::get<std::int64_t>(k));
  return std::get<std::string>(k);
}

inline std::string to_string(const KeyTuple& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ';';
    out += to_string(t[i]);
  }
  return out;
}

struct Relation {
  std::string name;
  std::vector<std::string> key_attrs;
  std::vector<std::string> data_attrs;
  std::vector<KeyTuple> keys;  // one tuple per row, aligned with data
  Matrix data;                 // rows x |data_attrs|

  std::size_t row_count() const { return keys.size(); }

  // Contiguous [begin, end) row ranges sharing one key tuple. Valid
  // because rows are sorted by key.
  std::vector<std::pair<std::size_t, std::size_t>> key_groups() const {
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= keys.size(); ++i) {
      if (i == keys.size() || keys[i] != keys[begin]) {
        groups.emplace_back(begin, i);
        begin = i;
      }
    }
    return groups;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

inline bool parse_int64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

// Full-row order: key tuple first, then data values. Makes the sorted
// form canonical for any input row permutation.
struct RowOrder {
  const std::vector<KeyTuple>* keys;
  const Matrix* data;
  bool operator()(std::size_t a, std::size_t b) const {
    if ((*keys)[a] != (*keys)[b]) return (*keys)[a] < (*keys)[b];
    auto ra = data->row(a);
    auto rb = data->row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(),
                                        rb.end());
  }
};

}  // namespace detail

// Sorts rows into the canonical order and enforces schema invariants.
// Call after filling keys/data by hand; load_relation does it already.
inline void canonicalize(Relation& rel) {
  {
    std::vector<std::string> names = rel.key_attrs;
    names.insert(names.end(), rel.data_attrs.begin(), rel.data_attrs.end());
    std::sort(names.begin(), names.end());
    auto dup = std::adjacent_find(names.begin(), names.end());
    if (dup != names.end())
      throw schema_error("relation " + rel.name + ": duplicate attribute '" +
                         *dup + "'");
    for (const auto& n : names)
      if (n.empty())
        throw schema_error("relation " + rel.name + ": empty attribute name");
  }
  for (std::size_t i = 0; i < rel.keys.size(); ++i)
    if (rel.keys[i].size() != rel.key_attrs.size())
      throw schema_error("relation " + rel.name + ": row " +
                         std::to_string(i) + " has wrong key arity");
  // Key columns must be single-typed.
  for (std::size_t c = 0; c < rel.key_attrs.size(); ++c) {
    for (std::size_t i = 1; i < rel.keys.size(); ++i)
      if (rel.keys[i][c].index() != rel.keys[0][c].index())
        throw schema_error("relation " + rel.name + ": key column '" +
                           rel.key_attrs[c] + "' mixes integers and strings");
  }

  std::vector<std::size_t> order(rel.row_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            detail::RowOrder{&rel.keys, &rel.data});

  std::vector<KeyTuple> keys(rel.row_count());
  Matrix data(rel.row_count(), rel.data_attrs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    keys[i] = std::move(rel.keys[order[i]]);
    auto src = rel.data.row(order[i]);
    auto dst = data.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  rel.keys = std::move(keys);
  rel.data = std::move(data);
}

inline Relation load_relation(const std::string& path, std::string name,
                              std::vector<std::string> key_attrs,
                              std::vector<std::string> data_attrs) {
  std::ifstream in(path);
  if (!in) throw error("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw parse_error("'" + path + "': missing header line");
  auto header = detail::split_csv_line(line);

  auto col_of = [&](const std::string& attr) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == attr) return i;
    throw schema_error("'" + path + "': column '" + attr +
                       "' not found in header");
  };

  std::vector<std::size_t> key_cols, data_cols;
  for (const auto& a : key_attrs) key_cols.push_back(col_of(a));
  for (const auto& a : data_attrs) data_cols.push_back(col_of(a));

  Relation rel;
  rel.name = std::move(name);
  rel.key_attrs = std::move(key_attrs);
  rel.data_attrs = std::move(data_attrs);

  std::vector<std::string> raw_keys;     // cell text, row-major
  std::vector<double> raw_data;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw parse_error("'" + path + "' line " + std::to_string(lineno) +
                        ": expected " + std::to_string(header.size()) +
                        " cells, got " + std::to_string(cells.size()));
    for (std::size_t c : key_cols) raw_keys.emplace_back(cells[c]);
    for (std::size_t c : data_cols) {
      double x;
      if (!detail::parse_double(cells[c], x) || !std::isfinite(x))
        throw parse_error("'" + path + "' line " + std::to_string(lineno) +
                          ": cannot parse data cell '" +
                          std::string(cells[c]) + "' as a finite real");
      raw_data.push_back(x);
    }
    ++rows;
  }

  // Decide per key column whether it is integer- or string-typed.
  const std::size_t kw = rel.key_attrs.size();
  std::vector<bool> is_int(kw, true);
  std::int64_t tmp;
  for (std::size_t c = 0; c < kw; ++c) {
    bool any_int = false, any_str = false;
    for (std::size_t i = 0; i < rows; ++i) {
      if (detail::parse_int64(raw_keys[i * kw + c], tmp))
        any_int = true;
      else
        any_str = true;
    }
    if (any_int && any_str)
      throw schema_error("'" + path + "': key column '" + rel.key_attrs[c] +
                         "' mixes integers and strings");
    is_int[c] = any_int;
  }

  rel.keys.resize(rows);
  rel.data.resize(rows, rel.data_attrs.size());
  for (std::size_t i = 0; i < rows; ++i) {
    rel.keys[i].resize(kw);
    for (std::size_t c = 0; c < kw; ++c) {
      const std::string& cell = raw_keys[i * kw + c];
      if (is_int[c]) {
        detail::parse_int64(cell, tmp);
        rel.keys[i][c] = tmp;
      } else {
        rel.keys[i][c] = cell;
      }
    }
    auto dst = rel.data.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c)
      dst[c] = raw_data[i * dst.size() + c];
  }

  canonicalize(rel);
  return rel;
}

}  // namespace figaro
