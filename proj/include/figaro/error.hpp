#pragma once

#include <stdexcept>
#include <string>

namespace figaro {

// Base error for everything thrown by the library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Declared attribute missing, duplicate names, mixed key types.
struct schema_error : error {
  using error::error;
};

// Malformed CSV cell or config syntax.
struct parse_error : error {
  using error::error;
};

// Internal consistency violated (dangling keys, non-divisible counts).
struct integrity_error : error {
  using error::error;
};

// A size guard (join cap, rotation cap, count overflow) was exceeded.
struct size_error : error {
  using error::error;
};

// Join tree shape or path property violated.
struct tree_error : error {
  using error::error;
};

// Semi-join reduction emptied a relation: the join result is empty.
struct empty_join_error : error {
  using error::error;
};

// Triangular factor too close to singular for back-substitution.
struct rank_error : error {
  using error::error;
};

}  // namespace figaro
