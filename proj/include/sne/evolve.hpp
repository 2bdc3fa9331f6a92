#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sne/ann.hpp"
#include "sne/decomp.hpp"
#include "sne/diversity.hpp"
#include "sne/modularity.hpp"
#include "sne/retina.hpp"
#include "sne/rng.hpp"

namespace sne {

enum class TreatmentKind { PA, UserMod, QMod, ModDiv, BehavDiv };

inline const char* treatment_name(TreatmentKind k) {
  switch (k) {
    case TreatmentKind::PA: return "PA";
    case TreatmentKind::UserMod: return "UserMod";
    case TreatmentKind::QMod: return "QMod";
    case TreatmentKind::ModDiv: return "ModDiv";
    case TreatmentKind::BehavDiv: return "BehavDiv";
  }
  throw std::logic_error("bad treatment kind");
}

inline TreatmentKind treatment_from_name(const std::string& s) {
  for (TreatmentKind k : {TreatmentKind::PA, TreatmentKind::UserMod, TreatmentKind::QMod,
                          TreatmentKind::ModDiv, TreatmentKind::BehavDiv})
    if (s == treatment_name(k)) return k;
  throw std::invalid_argument("unknown treatment kind: " + s);
}

struct Treatment {
  TreatmentKind kind = TreatmentKind::PA;
  DecompPattern m_rec;  // consumed by UserMod; logged for every treatment
  double objective_probability = 1.0;

  bool has_secondary() const { return kind != TreatmentKind::PA; }
};

struct ObjectiveVector {
  double primary = 0.0;
  std::optional<double> secondary;

  std::size_t arity() const { return secondary ? 2 : 1; }
  double at(std::size_t k) const { return k == 0 ? primary : *secondary; }
};

using Fronts = std::vector<std::vector<std::size_t>>;

namespace detail {

// a dominates b over the included objectives: >= on all, > on at least one
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b,
                      bool include_secondary) {
  bool strictly = false;
  if (a.primary < b.primary) return false;
  if (a.primary > b.primary) strictly = true;
  if (include_secondary && a.secondary && b.secondary) {
    if (*a.secondary < *b.secondary) return false;
    if (*a.secondary > *b.secondary) strictly = true;
  }
  return strictly;
}

}  // namespace detail

// Fast nondominated sorting (Deb et al.). The mask callback is sampled once
// per pairwise comparison and decides whether the secondary objective takes
// part in that comparison.
template <typename MaskFn>
Fronts nondominated_sort(const std::vector<ObjectiveVector>& vs, MaskFn&& mask) {
  const std::size_t n = vs.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<int> dominator_count(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool include_secondary = mask();
      if (detail::dominates(vs[i], vs[j], include_secondary)) {
        dominated[i].push_back(j);
        ++dominator_count[j];
      } else if (detail::dominates(vs[j], vs[i], include_secondary)) {
        dominated[j].push_back(i);
        ++dominator_count[i];
      }
    }

  Fronts fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i)
    if (dominator_count[i] == 0) current.push_back(i);
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (std::size_t i : current)
      for (std::size_t j : dominated[i])
        if (--dominator_count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  return fronts;
}

inline Fronts nondominated_sort(const std::vector<ObjectiveVector>& vs) {
  return nondominated_sort(vs, [] { return true; });
}

// Standard NSGA-II crowding distance over all objectives present.
// Boundary members per objective get +infinity; a zero objective range
// contributes nothing.
inline std::vector<double> crowding_distance(const std::vector<ObjectiveVector>& front) {
  const std::size_t n = front.size();
  std::vector<double> dist(n, 0.0);
  if (n == 0) return dist;
  const double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), inf);
    return dist;
  }
  const std::size_t arity = front[0].arity();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < arity; ++k) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return front[a].at(k) < front[b].at(k);
    });
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    const double range = front[order.back()].at(k) - front[order.front()].at(k);
    if (range <= 0.0) continue;
    for (std::size_t i = 1; i + 1 < n; ++i)
      dist[order[i]] += (front[order[i + 1]].at(k) - front[order[i - 1]].at(k)) / range;
  }
  return dist;
}

struct EvolveConfig {
  int pop_size = 200;
  int generations = 2000;
  double p_init = 0.2;
  MutationConfig mutation;
  ArchSpec arch;
  std::vector<int> measured;  // neuron ids the decomposition analysis is restricted to
};

struct Individual {
  Genome genome;
  double fitness = 0.0;
  BehaviorVector behavior;
  double q = 0.0;
  std::vector<int> pattern;  // dense colors over cfg.measured
  double delta_to_mrec = 0.0;
  ObjectiveVector objectives;
  int rank = 0;
  double crowding = 0.0;
};

struct EvoState {
  int generation = 0;
  std::vector<Individual> population;
};

struct GenerationStats {
  double best_fitness = 0.0;
  double median_q = 0.0;
  double median_delta_to_mrec = 0.0;
  double median_mod_diversity = 0.0;
};

struct RunHistory {
  std::vector<GenerationStats> generations;  // index = generation, size G+1
  Genome winner;
  double winner_fitness = 0.0;
  ObjectiveVector winner_objectives;
};

namespace detail {

inline std::vector<int> mrec_dense_colors(const Treatment& t, const EvolveConfig& cfg) {
  return dense_colors(t.m_rec, cfg.measured);
}

// q, pattern and delta depend on the connection structure only (weights and
// biases never enter the modularity analysis), so structure-preserving
// mutations and converged populations make memoization very effective.
struct StructureCache {
  struct Entry {
    double q;
    std::vector<int> pattern;
    double delta;
  };
  std::unordered_map<std::string, Entry> map;
  static constexpr std::size_t kMaxEntries = 1 << 19;

  static std::string key_of(const Genome& g) {
    std::string key;
    key.reserve(g.conns.size() * 2);
    for (const Conn& c : g.conns) {
      key.push_back(static_cast<char>(c.src));
      key.push_back(static_cast<char>(c.dst));
    }
    return key;
  }
};

inline Individual make_individual(Genome genome, const RetinaTask& task, const EvolveConfig& cfg,
                                  const std::vector<int>& mrec_colors,
                                  StructureCache* cache = nullptr) {
  Individual ind;
  ind.behavior = behavior_vector(genome, task);
  ind.fitness = fitness_from_behavior(ind.behavior, task);
  std::string key;
  if (cache) {
    key = StructureCache::key_of(genome);
    if (auto it = cache->map.find(key); it != cache->map.end()) {
      ind.q = it->second.q;
      ind.pattern = it->second.pattern;
      ind.delta_to_mrec = it->second.delta;
      ind.genome = std::move(genome);
      return ind;
    }
  }
  const Partition part = best_partition(to_graph(genome));
  ind.q = part.q;
  ind.pattern = dense_colors(restrict_partition(part, cfg.measured), cfg.measured);
  ind.delta_to_mrec = delta_decomp_dense(ind.pattern, mrec_colors);
  if (cache) {
    if (cache->map.size() >= StructureCache::kMaxEntries) cache->map.clear();
    cache->map.emplace(std::move(key),
                       StructureCache::Entry{ind.q, ind.pattern, ind.delta_to_mrec});
  }
  ind.genome = std::move(genome);
  return ind;
}

// fixed secondary objectives; diversity-based ones are filled in per pool
inline void assign_static_objectives(Individual& ind, const Treatment& t) {
  ind.objectives.primary = ind.fitness;
  switch (t.kind) {
    case TreatmentKind::PA: ind.objectives.secondary.reset(); break;
    case TreatmentKind::UserMod: ind.objectives.secondary = 1.0 - ind.delta_to_mrec; break;
    case TreatmentKind::QMod: ind.objectives.secondary = ind.q; break;
    case TreatmentKind::ModDiv:
    case TreatmentKind::BehavDiv: ind.objectives.secondary = 0.0; break;
  }
}

inline void assign_diversity_objectives(std::vector<Individual*>& pool, const Treatment& t) {
  if (t.kind != TreatmentKind::ModDiv && t.kind != TreatmentKind::BehavDiv) return;
  const DiversityMetric metric =
      t.kind == TreatmentKind::ModDiv ? DiversityMetric::modular : DiversityMetric::behavioral;
  PopulationDescriptors d;
  if (metric == DiversityMetric::modular) {
    d.patterns.reserve(pool.size());
    for (Individual* ind : pool) d.patterns.push_back(ind->pattern);
  } else {
    d.behaviors.reserve(pool.size());
    for (Individual* ind : pool) d.behaviors.push_back(ind->behavior);
  }
  for (std::size_t i = 0; i < pool.size(); ++i)
    pool[i]->objectives.secondary = diversity_score(i, d, metric);
}

// sort the pool, then assign ranks/crowding and pick the next population
inline std::vector<Individual> select_survivors(std::vector<Individual>& pool, int mu,
                                                const Treatment& t, Rng& rng) {
  std::vector<ObjectiveVector> vs;
  vs.reserve(pool.size());
  for (const Individual& ind : pool) vs.push_back(ind.objectives);

  Fronts fronts;
  if (t.has_secondary() && t.objective_probability < 1.0) {
    fronts = nondominated_sort(vs, [&] { return rng.bernoulli(t.objective_probability); });
  } else {
    fronts = nondominated_sort(vs);
  }

  std::vector<Individual> next;
  next.reserve(mu);
  for (std::size_t f = 0; f < fronts.size() && static_cast<int>(next.size()) < mu; ++f) {
    const auto& front = fronts[f];
    std::vector<ObjectiveVector> front_vs;
    front_vs.reserve(front.size());
    for (std::size_t idx : front) front_vs.push_back(vs[idx]);
    const std::vector<double> crowd = crowding_distance(front_vs);

    std::vector<std::size_t> order(front.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const int room = mu - static_cast<int>(next.size());
    if (static_cast<int>(front.size()) > room) {
      // truncate the split front by descending crowding, ties by pool index
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return crowd[a] > crowd[b]; });
      order.resize(room);
      std::sort(order.begin(), order.end());
    }
    for (std::size_t i : order) {
      Individual ind = std::move(pool[front[i]]);
      ind.rank = static_cast<int>(f);
      ind.crowding = crowd[i];
      next.push_back(std::move(ind));
    }
  }
  return next;
}

inline std::size_t tournament(const std::vector<Individual>& pop, Rng& rng) {
  const std::size_t a = rng.index(pop.size());
  const std::size_t b = rng.index(pop.size());
  if (pop[a].rank != pop[b].rank) return pop[a].rank < pop[b].rank ? a : b;
  if (pop[a].crowding != pop[b].crowding) return pop[a].crowding > pop[b].crowding ? a : b;
  return a;
}

}  // namespace detail

// One NSGA-II generation: mu offspring via binary tournaments + mutation,
// objective evaluation (diversity objectives against the combined
// parent+offspring pool), nondominated sorting of the 2*mu pool, and
// crowding-based truncation.
inline EvoState step_generation(EvoState state, const Treatment& treatment,
                                const RetinaTask& task, const EvolveConfig& cfg, Rng& rng,
                                const std::vector<int>& mrec_colors,
                                detail::StructureCache* cache = nullptr) {
  const int mu = static_cast<int>(state.population.size());
  std::vector<Individual> pool = std::move(state.population);
  pool.reserve(2 * mu);
  for (int k = 0; k < mu; ++k) {
    const std::size_t parent = detail::tournament(pool, rng);
    Genome child = mutate(pool[parent].genome, rng, cfg.mutation);
    Individual ind = detail::make_individual(std::move(child), task, cfg, mrec_colors, cache);
    detail::assign_static_objectives(ind, treatment);
    pool.push_back(std::move(ind));
  }

  std::vector<Individual*> pool_ptrs;
  pool_ptrs.reserve(pool.size());
  for (Individual& ind : pool) pool_ptrs.push_back(&ind);
  detail::assign_diversity_objectives(pool_ptrs, treatment);

  EvoState next;
  next.generation = state.generation + 1;
  next.population = detail::select_survivors(pool, mu, treatment, rng);
  return next;
}

namespace detail {

inline GenerationStats population_stats(const std::vector<Individual>& pop) {
  GenerationStats s;
  std::vector<double> qs, deltas;
  qs.reserve(pop.size());
  deltas.reserve(pop.size());
  s.best_fitness = 0.0;
  PopulationDescriptors d;
  d.patterns.reserve(pop.size());
  for (const Individual& ind : pop) {
    s.best_fitness = std::max(s.best_fitness, ind.fitness);
    qs.push_back(ind.q);
    deltas.push_back(ind.delta_to_mrec);
    d.patterns.push_back(ind.pattern);
  }
  std::vector<double> divs = diversity_scores(d, DiversityMetric::modular);
  auto med = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  };
  s.median_q = med(std::move(qs));
  s.median_delta_to_mrec = med(std::move(deltas));
  s.median_mod_diversity = med(std::move(divs));
  return s;
}

}  // namespace detail

// Full evolutionary run: random initial population, G generations, per-
// generation metrics, winner = best primary objective with the secondary
// objective breaking ties (then lowest index).
inline RunHistory run_replicate(const EvolveConfig& cfg, const Treatment& treatment,
                                const RetinaTask& task, std::uint64_t seed) {
  if (cfg.pop_size < 2) throw std::invalid_argument("run_replicate: population too small");
  Rng rng{seed};
  const auto arch = std::make_shared<const ArchSpec>(cfg.arch);
  const std::vector<int> mrec_colors = detail::mrec_dense_colors(treatment, cfg);

  detail::StructureCache cache;
  EvoState state;
  state.population.reserve(cfg.pop_size);
  for (int i = 0; i < cfg.pop_size; ++i) {
    Individual ind = detail::make_individual(random_genome(rng, arch, cfg.p_init), task, cfg,
                                             mrec_colors, &cache);
    detail::assign_static_objectives(ind, treatment);
    state.population.push_back(std::move(ind));
  }
  {
    std::vector<Individual*> ptrs;
    for (Individual& ind : state.population) ptrs.push_back(&ind);
    detail::assign_diversity_objectives(ptrs, treatment);
    // initial ranks/crowding so the first tournament round is well-defined
    std::vector<Individual> ranked =
        detail::select_survivors(state.population, cfg.pop_size, treatment, rng);
    state.population = std::move(ranked);
  }

  RunHistory history;
  history.generations.reserve(cfg.generations + 1);
  history.generations.push_back(detail::population_stats(state.population));
  for (int g = 0; g < cfg.generations; ++g) {
    state = step_generation(std::move(state), treatment, task, cfg, rng, mrec_colors, &cache);
    history.generations.push_back(detail::population_stats(state.population));
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < state.population.size(); ++i) {
    const Individual& cand = state.population[i];
    const Individual& cur = state.population[best];
    if (cand.fitness > cur.fitness) {
      best = i;
    } else if (cand.fitness == cur.fitness && cand.objectives.secondary &&
               cur.objectives.secondary &&
               *cand.objectives.secondary > *cur.objectives.secondary) {
      best = i;
    }
  }
  history.winner = state.population[best].genome;
  history.winner_fitness = state.population[best].fitness;
  history.winner_objectives = state.population[best].objectives;
  return history;
}

}  // namespace sne
