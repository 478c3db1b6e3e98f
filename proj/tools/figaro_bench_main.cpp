// figaro-bench: accuracy and scaling reports on synthetic
// Cartesian-product instances with a known ground-truth factor.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "figaro/driver.hpp"
#include "figaro/join.hpp"
#include "figaro/testbench.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ostream& open_report(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw figaro::error("cannot write '" + path + "'");
  return file;
}

int run_accuracy(std::size_t rows, std::size_t cols, std::uint64_t seed,
                 unsigned threads, const std::string& output) {
  auto inst = figaro::bench::generate_ground_truth(rows, rows, cols, cols,
                                                   seed);
  std::ofstream file;
  std::ostream& out = open_report(file, output);
  out << "engine,rows,cols,error\n";

  for (auto engine : {figaro::PostprocessEngine::thin,
                      figaro::PostprocessEngine::householder}) {
    figaro::PipelineOptions opts;
    opts.threads = threads;
    opts.engine = engine;
    auto res = figaro::run_pipeline(inst.relations, inst.tree, opts);
    const double err = figaro::bench::relative_error(
        figaro::bench::leading_block(res.factor.r, cols), inst.r_fixed);
    out << (engine == figaro::PostprocessEngine::thin ? "figaro-thin"
                                                      : "figaro-householder")
        << ',' << rows << ',' << cols << ',' << err << '\n';
  }

  // Reference path on the materialized product, when it fits.
  const std::uint64_t product = static_cast<std::uint64_t>(rows) * rows;
  if (product <= 4'000'000) {
    figaro::Layout layout = figaro::make_layout(inst.relations, inst.tree);
    figaro::Matrix a = figaro::materialize_join(inst.relations, inst.tree,
                                                layout, product);
    const double err = figaro::bench::relative_error(
        figaro::bench::leading_block(figaro::householder_oracle(a), cols),
        inst.r_fixed);
    out << "householder-materialized," << rows << ',' << cols << ',' << err
        << '\n';
  }
  return 0;
}

int run_scaling(std::size_t min_rows, std::size_t max_rows, std::size_t cols,
                std::uint64_t seed, unsigned threads, std::size_t runs,
                const std::string& output) {
  std::ofstream file;
  std::ostream& out = open_report(file, output);
  out << "engine,rows,cols,seconds\n";

  for (std::size_t rows = min_rows; rows <= max_rows; rows *= 2) {
    auto rels = figaro::bench::random_cartesian_pair(rows, cols, seed);
    figaro::JoinTree tree = figaro::build_join_tree(rels, 0, {-1, 0});
    figaro::Layout layout = figaro::make_layout(rels, tree);
    const std::uint64_t join_rows = static_cast<std::uint64_t>(rows) * rows;

    std::vector<double> core, mat;
    for (std::size_t run = 0; run < runs; ++run) {
      auto t0 = Clock::now();
      auto counts = figaro::compute_counts(rels, tree, threads);
      auto r0 = figaro::figaro_r0(rels, tree, layout, counts, threads);
      core.push_back(seconds_since(t0));

      t0 = Clock::now();
      {
        figaro::Matrix a =
            figaro::materialize_join(rels, tree, layout, join_rows);
        mat.push_back(seconds_since(t0));
      }
    }
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
    out << "figaro," << rows << ',' << cols << ',' << median(core) << '\n';
    out << "materialize," << rows << ',' << cols << ',' << median(mat)
        << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic accuracy and scaling reports"};
  app.require_subcommand(1);
  unsigned threads = figaro::default_thread_count();
  app.add_option("--threads", threads, "worker threads")
      ->check(CLI::PositiveNumber);

  auto* acc = app.add_subcommand(
      "accuracy", "error against a reverse-engineered ground truth");
  std::size_t rows = 512, cols = 16;
  std::uint64_t seed = 1;
  std::string output;
  acc->add_option("--rows", rows, "rows per relation");
  acc->add_option("--cols", cols, "data columns per relation");
  acc->add_option("--seed", seed, "random seed");
  acc->add_option("--output", output, "report file (default stdout)");

  auto* sc = app.add_subcommand("scaling",
                                "core transform vs join materialization");
  std::size_t min_rows = 1024, max_rows = 4096, sc_cols = 16, runs = 5;
  std::uint64_t sc_seed = 1;
  std::string sc_output;
  sc->add_option("--min-rows", min_rows, "starting rows per relation");
  sc->add_option("--max-rows", max_rows, "final rows per relation (doubling)");
  sc->add_option("--cols", sc_cols, "data columns per relation");
  sc->add_option("--runs", runs, "timing repetitions (median reported)");
  sc->add_option("--seed", sc_seed, "random seed");
  sc->add_option("--output", sc_output, "report file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (acc->parsed())
      return run_accuracy(rows, cols, seed, threads, output);
    return run_scaling(min_rows, max_rows, sc_cols, sc_seed, threads, runs,
                       sc_output);
  } catch (const std::exception& e) {
    std::cerr << "figaro-bench: " << e.what() << '\n';
    return 1;
  }
}
