#pragma once

// End-to-end pipeline: load and reduce the database, compute counts,
// run the factorized transform, post-process into R, write outputs.
// The CLI is a thin wrapper over run(); tests call the pieces directly.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "figaro/counts.hpp"
#include "figaro/error.hpp"
#include "figaro/figaro.hpp"
#include "figaro/io.hpp"
#include "figaro/join_tree.hpp"
#include "figaro/postprocess.hpp"
#include "figaro/reduce.hpp"

namespace figaro {

enum class PostprocessEngine { thin, householder };

struct PipelineOptions {
  unsigned threads = default_thread_count();
  PostprocessEngine engine = PostprocessEngine::thin;
  bool assume_reduced = false;
};

struct PipelineResult {
  TriangularFactor factor;  // sign-normalized
  std::size_t r0_rows = 0;
  std::size_t input_rows = 0;   // M
  std::size_t data_columns = 0; // N
  double seconds_counts = 0.0;
  double seconds_figaro = 0.0;
  double seconds_postprocess = 0.0;
  CountTables counts;
  std::optional<AlmostTriangular> r0;  // kept only when requested
};

// Runs everything after loading. Relations must be sorted (they are,
// coming out of load_relation / canonicalize).
inline PipelineResult run_pipeline(std::vector<Relation> relations,
                                   const JoinTree& tree,
                                   const PipelineOptions& opts,
                                   bool keep_r0 = false) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  validate_join_tree(relations, tree);
  if (!opts.assume_reduced)
    relations = semi_join_reduce(std::move(relations), tree);

  PipelineResult res;
  for (const auto& rel : relations) res.input_rows += rel.row_count();
  const Layout layout = make_layout(relations, tree);
  res.data_columns = layout.total;

  auto t0 = clock::now();
  res.counts = compute_counts(relations, tree, opts.threads);
  res.seconds_counts = seconds_since(t0);

  t0 = clock::now();
  AlmostTriangular r0 =
      figaro_r0(relations, tree, layout, res.counts, opts.threads);
  res.seconds_figaro = seconds_since(t0);
  res.r0_rows = r0.row_count();

  t0 = clock::now();
  TriangularFactor factor = opts.engine == PostprocessEngine::thin
                                ? postprocess_thin(r0, opts.threads)
                                : postprocess_householder(r0);
  factor.column_names = layout.column_names;
  res.factor = normalize_signs(std::move(factor));
  res.seconds_postprocess = seconds_since(t0);

  if (keep_r0) res.r0 = std::move(r0);
  return res;
}

struct RunConfig {
  std::string config_path;
  std::string output_path;
  unsigned threads = default_thread_count();
  PostprocessEngine engine = PostprocessEngine::thin;
  bool assume_reduced = false;
  std::string q_output_path;       // --compute-q
  std::string counts_dump_path;    // --dump-counts
  std::string r0_dump_path;        // --dump-r0
};

namespace detail {

inline std::string dirname_of(const std::string& path) {
  auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".")
                                    : path.substr(0, slash);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

// Full CLI behaviour: returns the process exit status and reports
// per-phase timing on `log`. Errors are reported with a phase tag.
inline int run(const RunConfig& cfg, std::ostream& log = std::cout,
               std::ostream& err = std::cerr) {
  std::string phase = "config";
  try {
    if (cfg.threads < 1) throw error("--threads must be at least 1");
    std::ifstream in(cfg.config_path);
    if (!in) throw error("cannot open '" + cfg.config_path + "'");
    DatabaseConfig config = parse_config(in);
    parse_tree_term(config.tree_term);  // report syntax errors as config

    phase = "load";
    Database db =
        load_database(config, detail::dirname_of(cfg.config_path));

    phase = "pipeline";
    PipelineOptions opts;
    opts.threads = cfg.threads;
    opts.engine = cfg.engine;
    opts.assume_reduced = cfg.assume_reduced;
    // The reducer runs inside run_pipeline; keep the reduced relations
    // for Q recovery by reducing here instead.
    if (!opts.assume_reduced) {
      db.relations = semi_join_reduce(std::move(db.relations), db.tree);
      opts.assume_reduced = true;
    }
    PipelineResult res = run_pipeline(db.relations, db.tree, opts,
                                      !cfg.r0_dump_path.empty());

    phase = "write";
    {
      auto out = detail::open_out(cfg.output_path);
      write_triangular_csv(out, res.factor);
    }
    const Layout layout = make_layout(db.relations, db.tree);
    if (!cfg.counts_dump_path.empty()) {
      auto out = detail::open_out(cfg.counts_dump_path);
      write_counts_csv(out, db.relations, db.tree, res.counts);
    }
    if (!cfg.r0_dump_path.empty()) {
      auto out = detail::open_out(cfg.r0_dump_path);
      write_matrix_csv(out, res.r0->dense(), layout.column_names);
    }
    if (!cfg.q_output_path.empty()) {
      phase = "compute-q";
      auto out = detail::open_out(cfg.q_output_path);
      std::uint64_t rows = recover_q(
          db.relations, db.tree, layout, res.factor,
          [&](std::span<const double>, std::span<const double> q) {
            for (std::size_t j = 0; j < q.size(); ++j) {
              if (j) out << ',';
              out << format_value(q[j]);
            }
            out << '\n';
          });
      log << "q rows:      " << rows << " -> " << cfg.q_output_path << '\n';
    }

    log << "relations:   " << db.relations.size() << "  M=" << res.input_rows
        << " rows  N=" << res.data_columns << " data columns\n"
        << "join tree:   " << to_term_string(db.tree, db.relations, db.tree.root)
        << '\n'
        << "counts:      " << res.seconds_counts << " s\n"
        << "figaro:      " << res.seconds_figaro
        << " s   rows(R0)=" << res.r0_rows << '\n'
        << "postprocess: " << res.seconds_postprocess << " s   engine="
        << (cfg.engine == PostprocessEngine::thin ? "thin" : "householder")
        << '\n'
        << "R written:   " << cfg.output_path << " (" << res.data_columns
        << 'x' << res.data_columns << ")\n";
    return 0;
  } catch (const std::exception& e) {
    err << "figaro: [" << phase << "] " << e.what() << '\n';
    return 1;
  }
}

}  // namespace figaro
