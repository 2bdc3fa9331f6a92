#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sne/ann.hpp"
#include "sne/harness.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const sne::ExperimentConfig cfg = sne::parse_config_file(config_path);
  sne::run_experiment(cfg, &std::cerr);
  return 0;
}

int cmd_stats(const std::vector<std::string>& csv_paths, const std::string& metric,
              int generation) {
  std::vector<sne::CsvRow> rows;
  for (const std::string& path : csv_paths) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open CSV file: " + path);
    auto part = sne::parse_results_csv(f, path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  sne::report_stats(rows, metric, generation, std::cout);
  return 0;
}

int cmd_dump_net(const std::string& genome_path) {
  std::ifstream f(genome_path);
  if (!f) throw std::runtime_error("cannot open genome file: " + genome_path);
  const sne::Genome g = sne::load_genome(f);
  sne::write_dot(g, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structurally guided neuroevolution experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "experiment config file")->required();

  std::vector<std::string> csv_paths;
  std::string metric = "best_fitness";
  int generation = 0;
  auto* stats = app.add_subcommand("stats", "medians, bootstrap CIs and pairwise U tests");
  stats->add_option("csv", csv_paths, "results CSV file(s)")->required();
  stats->add_option("--metric", metric, "CSV metric column")->required();
  stats->add_option("--generation", generation, "generation to analyze")->required();

  std::string genome_path;
  auto* dump = app.add_subcommand("dump-net", "emit a genome dump as GraphViz DOT");
  dump->add_option("genome", genome_path, "genome dump file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage error
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*stats) return cmd_stats(csv_paths, metric, generation);
    if (*dump) return cmd_dump_net(genome_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;  // runtime error
  }
  return 1;
}
