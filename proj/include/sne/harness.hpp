#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sne/evolve.hpp"
#include "sne/retina.hpp"
#include "sne/stats.hpp"

namespace sne {

constexpr const char* kDefaultMrec = "[[i1,i2,i3,i4],[i5,i6,i7,i8]]";
constexpr const char* kCsvHeader =
    "generation,treatment,replicate,best_fitness,median_q,median_delta_to_mrec,"
    "median_mod_diversity";
constexpr const char* kThreadsEnvVar = "SNE_THREADS";

struct ExperimentConfig {
  RetinaTask::Mode task_mode = RetinaTask::Mode::modular;
  std::string pattern_file;                 // modular mode
  std::uint64_t nonmodular_seed = 0;        // nonmodular mode without pattern file
  std::vector<Treatment> treatments;
  int population = 0;
  int generations = 0;
  int replicates = 0;
  std::uint64_t base_seed = 0;
  EvolveConfig evolve;  // arch/measured/mutation/p_init; population & generations mirrored in
  std::string m_rec_text = kDefaultMrec;
  double objective_probability = 1.0;  // default for treatments without an override
  std::string output_dir;
};

namespace detail {

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] inline void config_error(const std::string& key, int line, const std::string& what) {
  throw std::runtime_error("config line " + std::to_string(line) + ", key '" + key +
                           "': " + what);
}

inline double to_double(const KeyValue& kv) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_error(kv.key, kv.line, "expected a number, got '" + kv.value + "'");
  }
}

inline long long to_int(const KeyValue& kv) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    config_error(kv.key, kv.line, "expected an integer, got '" + kv.value + "'");
  }
}

}  // namespace detail

// Flat key-value config with one [treatment] block per treatment.
inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::map<std::string, detail::KeyValue> globals;
  std::vector<std::map<std::string, detail::KeyValue>> treatment_blocks;
  bool in_treatment = false;

  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t == "[treatment]") {
      treatment_blocks.emplace_back();
      in_treatment = true;
      continue;
    }
    const auto colon = t.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key: value', got '" + t + "'");
    detail::KeyValue kv{detail::trim(t.substr(0, colon)), detail::trim(t.substr(colon + 1)),
                        lineno};
    if (kv.key.empty() || kv.value.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": empty key or value");
    auto& dest = in_treatment ? treatment_blocks.back() : globals;
    if (dest.count(kv.key))
      detail::config_error(kv.key, lineno, "duplicate key");
    dest.emplace(kv.key, kv);
  }

  auto require = [&](const std::string& key) -> const detail::KeyValue& {
    auto it = globals.find(key);
    if (it == globals.end())
      throw std::runtime_error("config: missing required key '" + key + "'");
    return it->second;
  };
  auto optional_kv = [&](const std::string& key) -> const detail::KeyValue* {
    auto it = globals.find(key);
    return it == globals.end() ? nullptr : &it->second;
  };

  cfg.population = static_cast<int>(detail::to_int(require("population")));
  cfg.generations = static_cast<int>(detail::to_int(require("generations")));
  cfg.replicates = static_cast<int>(detail::to_int(require("replicates")));
  cfg.base_seed = static_cast<std::uint64_t>(detail::to_int(require("seed")));
  cfg.output_dir = require("output_dir").value;
  if (cfg.population < 2) detail::config_error("population", require("population").line, "must be >= 2");
  if (cfg.generations < 0) detail::config_error("generations", require("generations").line, "must be >= 0");
  if (cfg.replicates < 1) detail::config_error("replicates", require("replicates").line, "must be >= 1");

  const detail::KeyValue& task = require("task");
  if (task.value == "modular") {
    cfg.task_mode = RetinaTask::Mode::modular;
    cfg.pattern_file = require("pattern_file").value;
  } else if (task.value == "nonmodular") {
    cfg.task_mode = RetinaTask::Mode::nonmodular;
    if (const auto* pf = optional_kv("pattern_file")) {
      cfg.pattern_file = pf->value;
    } else {
      cfg.nonmodular_seed = static_cast<std::uint64_t>(detail::to_int(require("nonmodular_seed")));
    }
  } else {
    detail::config_error("task", task.line, "expected 'modular' or 'nonmodular'");
  }

  if (const auto* kv = optional_kv("m_rec")) cfg.m_rec_text = kv->value;
  if (const auto* kv = optional_kv("p_init")) cfg.evolve.p_init = detail::to_double(*kv);
  if (const auto* kv = optional_kv("p_add_conn")) cfg.evolve.mutation.p_add_conn = detail::to_double(*kv);
  if (const auto* kv = optional_kv("p_remove_conn")) cfg.evolve.mutation.p_remove_conn = detail::to_double(*kv);
  if (const auto* kv = optional_kv("p_move_conn")) cfg.evolve.mutation.p_move_conn = detail::to_double(*kv);
  if (const auto* kv = optional_kv("p_weight_change")) cfg.evolve.mutation.p_weight_change = detail::to_double(*kv);
  if (const auto* kv = optional_kv("p_bias_change")) cfg.evolve.mutation.p_bias_change = detail::to_double(*kv);
  if (const auto* kv = optional_kv("objective_probability")) {
    cfg.objective_probability = detail::to_double(*kv);
    if (cfg.objective_probability <= 0.0 || cfg.objective_probability > 1.0)
      detail::config_error(kv->key, kv->line, "must be in (0, 1]");
  }

  cfg.evolve.pop_size = cfg.population;
  cfg.evolve.generations = cfg.generations;
  // retina: decompositions are measured on the input neurons
  for (int i = 0; i < cfg.evolve.arch.input_count(); ++i) cfg.evolve.measured.push_back(i);

  const DecompPattern m_rec =
      parse_pattern(cfg.m_rec_text, [&](const std::string& n) { return cfg.evolve.arch.node_id(n); });

  if (treatment_blocks.empty()) throw std::runtime_error("config: no [treatment] blocks");
  for (const auto& block : treatment_blocks) {
    auto it = block.find("kind");
    if (it == block.end()) throw std::runtime_error("config: [treatment] block missing 'kind'");
    Treatment t;
    t.kind = treatment_from_name(it->second.value);
    t.m_rec = m_rec;
    t.objective_probability = cfg.objective_probability;
    if (auto op = block.find("objective_probability"); op != block.end()) {
      t.objective_probability = detail::to_double(op->second);
      if (t.objective_probability <= 0.0 || t.objective_probability > 1.0)
        detail::config_error("objective_probability", op->second.line, "must be in (0, 1]");
    }
    for (const auto& [key, kv] : block)
      if (key != "kind" && key != "objective_probability")
        detail::config_error(key, kv.line, "unknown treatment key");
    cfg.treatments.push_back(std::move(t));
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return parse_config(f);
}

inline RetinaTask task_from_config(const ExperimentConfig& cfg) {
  if (!cfg.pattern_file.empty()) {
    RetinaTask task = load_task_file(cfg.pattern_file);
    const bool modular = task.mode == RetinaTask::Mode::modular;
    if (modular != (cfg.task_mode == RetinaTask::Mode::modular))
      throw std::runtime_error("config: pattern file mode does not match 'task'");
    return task;
  }
  Rng rng{cfg.nonmodular_seed};
  return make_nonmodular_task(rng);
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_cell_csv(std::ostream& os, const ExperimentConfig& cfg,
                           const Treatment& treatment, int replicate, std::uint64_t seed,
                           const RunHistory& history) {
  os << "# treatment=" << treatment_name(treatment.kind) << " replicate=" << replicate
     << " seed=" << seed << '\n';
  os << kCsvHeader << '\n';
  for (std::size_t g = 0; g < history.generations.size(); ++g) {
    const GenerationStats& s = history.generations[g];
    os << g << ',' << treatment_name(treatment.kind) << ',' << replicate << ','
       << fmt_double(s.best_fitness) << ',' << fmt_double(s.median_q) << ','
       << fmt_double(s.median_delta_to_mrec) << ',' << fmt_double(s.median_mod_diversity)
       << '\n';
  }
  (void)cfg;
}

inline int worker_thread_count() {
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

}  // namespace detail

struct CellResult {
  std::string treatment;
  int replicate = 0;
  std::uint64_t seed = 0;
  RunHistory history;
};

// Runs every (treatment x replicate) cell. Cells are independent; they are
// distributed over SNE_THREADS workers and the outputs are assembled in a
// fixed order afterwards, so thread count never affects the results.
inline std::vector<CellResult> run_experiment_cells(const ExperimentConfig& cfg,
                                                    std::ostream* progress = nullptr) {
  const RetinaTask task = task_from_config(cfg);
  struct Job {
    std::size_t treatment_idx;
    int replicate;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < cfg.treatments.size(); ++t)
    for (int r = 0; r < cfg.replicates; ++r)
      jobs.push_back({t, r, cfg.base_seed + static_cast<std::uint64_t>(r)});

  std::vector<CellResult> results(jobs.size());
  std::mutex progress_mutex;
  std::atomic<std::size_t> next_job{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next_job.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      const Treatment& treatment = cfg.treatments[job.treatment_idx];
      CellResult& res = results[j];
      res.treatment = treatment_name(treatment.kind);
      res.replicate = job.replicate;
      res.seed = job.seed;
      res.history = run_replicate(cfg.evolve, treatment, task, job.seed);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        *progress << "done " << res.treatment << " replicate " << res.replicate << '\n';
      }
    }
  };

  const int n_threads = detail::worker_thread_count();
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  return results;
}

// Full `run` entry point: runs all cells and writes per-cell CSVs, winner
// genome dumps, and a merged results.csv into the output directory.
inline void run_experiment(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const std::vector<CellResult> results = run_experiment_cells(cfg, progress);

  std::size_t idx = 0;
  std::ofstream merged(fs::path(cfg.output_dir) / "results.csv");
  merged << "# experiment: population=" << cfg.population << " generations=" << cfg.generations
         << " replicates=" << cfg.replicates << " base_seed=" << cfg.base_seed << '\n';
  for (const CellResult& res : results)
    merged << "# cell treatment=" << res.treatment << " replicate=" << res.replicate
           << " seed=" << res.seed << '\n';
  merged << kCsvHeader << '\n';

  for (std::size_t t = 0; t < cfg.treatments.size(); ++t) {
    for (int r = 0; r < cfg.replicates; ++r, ++idx) {
      const CellResult& res = results[idx];
      const std::string stem =
          res.treatment + "_rep" + std::to_string(res.replicate);
      std::ofstream cell(fs::path(cfg.output_dir) / (stem + ".csv"));
      detail::write_cell_csv(cell, cfg, cfg.treatments[t], r, res.seed, res.history);
      std::ofstream winner(fs::path(cfg.output_dir) / (stem + "_winner.genome"));
      dump_genome(res.history.winner, winner);
      for (std::size_t g = 0; g < res.history.generations.size(); ++g) {
        const GenerationStats& s = res.history.generations[g];
        merged << g << ',' << res.treatment << ',' << res.replicate << ','
               << detail::fmt_double(s.best_fitness) << ',' << detail::fmt_double(s.median_q)
               << ',' << detail::fmt_double(s.median_delta_to_mrec) << ','
               << detail::fmt_double(s.median_mod_diversity) << '\n';
      }
    }
  }
}

// --- stats subcommand -------------------------------------------------------

struct CsvRow {
  int generation = 0;
  std::string treatment;
  int replicate = 0;
  double best_fitness = 0, median_q = 0, median_delta_to_mrec = 0, median_mod_diversity = 0;
};

inline std::vector<CsvRow> parse_results_csv(std::istream& is, const std::string& name) {
  std::vector<CsvRow> rows;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t == kCsvHeader) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw std::runtime_error(name + " line " + std::to_string(lineno) +
                               ": expected 7 CSV fields");
    CsvRow row;
    row.generation = std::stoi(fields[0]);
    row.treatment = fields[1];
    row.replicate = std::stoi(fields[2]);
    row.best_fitness = std::stod(fields[3]);
    row.median_q = std::stod(fields[4]);
    row.median_delta_to_mrec = std::stod(fields[5]);
    row.median_mod_diversity = std::stod(fields[6]);
    rows.push_back(std::move(row));
  }
  if (!header_seen && rows.empty())
    throw std::runtime_error(name + ": no CSV data found");
  return rows;
}

inline double csv_metric(const CsvRow& row, const std::string& metric) {
  if (metric == "best_fitness") return row.best_fitness;
  if (metric == "median_q") return row.median_q;
  if (metric == "median_delta_to_mrec") return row.median_delta_to_mrec;
  if (metric == "median_mod_diversity") return row.median_mod_diversity;
  throw std::runtime_error(
      "unknown metric '" + metric +
      "' (expected best_fitness, median_q, median_delta_to_mrec or median_mod_diversity)");
}

// Per-treatment medians with bootstrap CIs plus all-pairs Mann-Whitney
// p-values for one metric at one generation.
inline void report_stats(const std::vector<CsvRow>& rows, const std::string& metric,
                         int generation, std::ostream& os) {
  std::map<std::string, std::vector<double>> by_treatment;
  bool generation_seen = false;
  for (const CsvRow& row : rows) {
    if (row.generation != generation) continue;
    generation_seen = true;
    by_treatment[row.treatment].push_back(csv_metric(row, metric));
  }
  if (!generation_seen)
    throw std::runtime_error("generation " + std::to_string(generation) +
                             " not present in the CSV data");
  if (by_treatment.size() < 2) throw std::runtime_error("need at least two treatments");

  std::vector<SampleSet> samples;
  for (auto& [label, values] : by_treatment) samples.push_back({label, values});

  os << "metric=" << metric << " generation=" << generation << '\n';
  os << "treatment,n,median,ci_low,ci_high\n";
  for (const SampleSet& s : samples) {
    Rng rng{0x5eedu};  // fixed seed: reports are deterministic
    const auto [lo, hi] = bootstrap_median_ci(s, rng);
    os << s.label << ',' << s.values.size() << ',' << detail::fmt_double(median(s.values))
       << ',' << detail::fmt_double(lo) << ',' << detail::fmt_double(hi) << '\n';
  }
  os << "pair,u,p,significant\n";
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const MannWhitneyResult mw = mann_whitney_u(samples[i], samples[j]);
      os << samples[i].label << " vs " << samples[j].label << ',' << detail::fmt_double(mw.u_a)
         << ',' << detail::fmt_double(mw.p) << ',' << (mw.p < 0.05 ? "yes" : "no") << '\n';
    }
}

// --- DOT export -------------------------------------------------------------

// Fixed layered layout: inputs on top, outputs at the bottom. Node fill
// color indexes the best-partition module of the undirected graph.
inline void write_dot(const Genome& g, std::ostream& os) {
  static const char* kPalette[] = {"#8dd3c7", "#ffffb3", "#bebada", "#fb8072",
                                   "#80b1d3", "#fdb462", "#b3de69", "#fccde5",
                                   "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f"};
  constexpr int kPaletteSize = 12;
  const ArchSpec& a = *g.arch;
  const Partition part = best_partition(to_graph(g));

  os << "graph network {\n";
  os << "  rankdir=TB;\n";
  os << "  node [shape=circle, style=filled];\n";
  for (int layer = 0; layer < a.layer_count(); ++layer) {
    os << "  { rank=same;";
    const int off = a.layer_offset(layer);
    for (int n = off; n < off + a.layer_sizes[layer]; ++n) os << ' ' << a.node_name(n) << ';';
    os << " }\n";
  }
  for (int n = 0; n < a.node_count(); ++n)
    os << "  " << a.node_name(n) << " [fillcolor=\""
       << kPalette[part.module_of[n] % kPaletteSize] << "\"];\n";
  for (const Conn& c : g.conns)
    os << "  " << a.node_name(c.src) << " -- " << a.node_name(c.dst) << " [label=\"" << c.weight
       << "\"];\n";
  os << "}\n";
}

}  // namespace sne
