// figaro: compute the upper-triangular QR factor of the matrix defined
// by an acyclic natural join, directly from the input relations.

#include <string>

#include <CLI11.hpp>

#include "figaro/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "QR factor of an acyclic join, computed without materializing the "
      "join"};

  figaro::RunConfig cfg;
  std::string engine = "thin";
  app.add_option("--config", cfg.config_path,
                 "join configuration file (relation/tree directives)")
      ->required();
  app.add_option("--output", cfg.output_path, "output CSV for R")->required();
  app.add_option("--threads", cfg.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--postprocess", engine, "post-processing engine")
      ->check(CLI::IsMember({"thin", "householder"}));
  app.add_flag("--assume-reduced", cfg.assume_reduced,
               "skip the semi-join reduction sweep");
  app.add_option("--compute-q", cfg.q_output_path,
                 "also stream Q = A R^-1 to this CSV");
  app.add_option("--dump-counts", cfg.counts_dump_path,
                 "write per-node count aggregates to this CSV");
  app.add_option("--dump-r0", cfg.r0_dump_path,
                 "write the intermediate almost-triangular matrix");

  CLI11_PARSE(app, argc, argv);
  cfg.engine = engine == "householder" ? figaro::PostprocessEngine::householder
                                       : figaro::PostprocessEngine::thin;
  return figaro::run(cfg);
}
