#pragma once

#include <algorithm>
#include <cctype>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sne/modularity.hpp"

namespace sne {

// A grouping of designated ("measured") neurons into modules: a list of
// lists of neuron ids. Neurons not listed anywhere are unspecified and
// ignored by all comparisons.
struct DecompPattern {
  std::vector<std::vector<int>> modules;

  std::vector<int> measured_set() const {
    std::vector<int> all;
    for (const auto& m : modules) all.insert(all.end(), m.begin(), m.end());
    std::sort(all.begin(), all.end());
    return all;
  }

  int measured_count() const {
    int n = 0;
    for (const auto& m : modules) n += static_cast<int>(m.size());
    return n;
  }

  void validate() const {
    if (modules.empty()) throw std::invalid_argument("pattern: needs at least one module");
    for (const auto& m : modules)
      if (m.empty()) throw std::invalid_argument("pattern: empty module");
    auto all = measured_set();
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
      throw std::invalid_argument("pattern: neuron listed in two modules");
  }
};

// Restrict a graph partition to the measured neurons: one output module per
// partition label occurring among them, ordered by first occurrence in the
// measured list.
inline DecompPattern restrict_partition(const Partition& p, const std::vector<int>& measured) {
  DecompPattern out;
  std::unordered_map<int, int> label_to_module;
  for (int id : measured) {
    if (id < 0 || id >= static_cast<int>(p.module_of.size()))
      throw std::invalid_argument("restrict_partition: unknown neuron id " + std::to_string(id));
    const int label = p.module_of[id];
    auto [it, inserted] = label_to_module.try_emplace(label, static_cast<int>(out.modules.size()));
    if (inserted) out.modules.emplace_back();
    out.modules[it->second].push_back(id);
  }
  return out;
}

namespace detail {

// Per-id module color of a pattern (color = module index).
inline std::unordered_map<int, int> color_map(const DecompPattern& p) {
  std::unordered_map<int, int> colors;
  for (std::size_t c = 0; c < p.modules.size(); ++c)
    for (int id : p.modules[c]) colors.emplace(id, static_cast<int>(c));
  return colors;
}

// Dense core of the uniformity/conflicts computation. Inputs are aligned:
// position k holds the comp color and the evo color of the same neuron.
// Returns {uniformity, conflicts}.
struct DeltaParts {
  double uniformity;
  double conflicts;
};

inline DeltaParts delta_parts_dense(std::span<const int> evo_colors,
                                    std::span<const int> comp_colors) {
  const int n = static_cast<int>(comp_colors.size());
  if (n == 0) throw std::invalid_argument("delta: empty comparison pattern");
  int kc = 0, ke = 0;
  for (int c : comp_colors) kc = std::max(kc, c + 1);
  for (int e : evo_colors) ke = std::max(ke, e + 1);

  // counts[c][e]: neurons in comp module c with evo color e
  std::vector<int> counts(static_cast<std::size_t>(kc) * ke, 0);
  std::vector<int> comp_size(kc, 0);
  for (int i = 0; i < n; ++i) {
    ++counts[comp_colors[i] * ke + evo_colors[i]];
    ++comp_size[comp_colors[i]];
  }

  int uniform = 0;
  for (int c = 0; c < kc; ++c) {
    int best = 0;
    for (int e = 0; e < ke; ++e) best = std::max(best, counts[c * ke + e]);
    uniform += best;
  }
  const double uniformity = static_cast<double>(uniform) / n;

  if (kc == 1) return {uniformity, 1.0};  // no module pairs: vacuously no conflicts

  // matches over ordered pairs of distinct comp modules, per evo color:
  // (sum_c counts[c][e])^2 - sum_c counts[c][e]^2
  long long num_conflicts = 0;
  for (int e = 0; e < ke; ++e) {
    long long total = 0, sq = 0;
    for (int c = 0; c < kc; ++c) {
      const long long v = counts[c * ke + e];
      total += v;
      sq += v * v;
    }
    num_conflicts += total * total - sq;
  }
  long long max_conflicts = 0;
  {
    long long total = 0, sq = 0;
    for (int c = 0; c < kc; ++c) {
      total += comp_size[c];
      sq += static_cast<long long>(comp_size[c]) * comp_size[c];
    }
    max_conflicts = total * total - sq;
  }
  const double conflicts =
      static_cast<double>(max_conflicts - num_conflicts) / static_cast<double>(max_conflicts);
  return {uniformity, conflicts};
}

// Align a pattern pair: comp's neurons, in module order, with their colors
// in both patterns. Throws if a comp neuron is absent from evo.
inline DeltaParts delta_parts(const DecompPattern& evo, const DecompPattern& comp) {
  const auto evo_colors = color_map(evo);
  std::vector<int> ec, cc;
  ec.reserve(comp.measured_count());
  cc.reserve(comp.measured_count());
  for (std::size_t c = 0; c < comp.modules.size(); ++c) {
    for (int id : comp.modules[c]) {
      auto it = evo_colors.find(id);
      if (it == evo_colors.end())
        throw std::invalid_argument("delta: neuron " + std::to_string(id) +
                                    " of the compared pattern is absent from the evolved one");
      ec.push_back(it->second);
      cc.push_back(static_cast<int>(c));
    }
  }
  return delta_parts_dense(ec, cc);
}

}  // namespace detail

// Fraction of comp neurons whose evo color matches the most common evo
// color of their comp module. 1 = fully uniform.
inline double uniformity(const DecompPattern& m_evo, const DecompPattern& m_comp) {
  return detail::delta_parts(m_evo, m_comp).uniformity;
}

// Normalized complement of the conflict count over ordered pairs of
// distinct comp modules. 1 = no conflicts.
inline double conflicts(const DecompPattern& m_evo, const DecompPattern& m_comp) {
  return detail::delta_parts(m_evo, m_comp).conflicts;
}

// Decomposition distance: 1 - (uniformity + conflicts) / 2.
// 0 = perfect match, 1 = worst possible.
inline double delta_decomp(const DecompPattern& m_evo, const DecompPattern& m_comp) {
  const auto parts = detail::delta_parts(m_evo, m_comp);
  return 1.0 - (parts.uniformity + parts.conflicts) / 2.0;
}

// Fast path used for population diversity: both patterns expressed as dense
// color vectors over the same measured-neuron ordering.
inline double delta_decomp_dense(std::span<const int> evo_colors,
                                 std::span<const int> comp_colors) {
  const auto parts = detail::delta_parts_dense(evo_colors, comp_colors);
  return 1.0 - (parts.uniformity + parts.conflicts) / 2.0;
}

// Dense color vector of a pattern over a fixed measured-neuron ordering.
inline std::vector<int> dense_colors(const DecompPattern& p, const std::vector<int>& measured) {
  const auto colors = detail::color_map(p);
  std::vector<int> out;
  out.reserve(measured.size());
  for (int id : measured) {
    auto it = colors.find(id);
    if (it == colors.end())
      throw std::invalid_argument("dense_colors: neuron " + std::to_string(id) + " not in pattern");
    out.push_back(it->second);
  }
  return out;
}

// --- pattern literal syntax: [[i1,i2],[i3]] --------------------------------

// Parses the nested-bracket pattern syntax. Neuron names are resolved
// through the supplied callback (e.g. ArchSpec::node_id).
template <typename NameResolver>
DecompPattern parse_pattern(const std::string& text, NameResolver&& resolve) {
  DecompPattern p;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  auto expect = [&](char c) {
    skip_ws();
    if (i >= text.size() || text[i] != c)
      throw std::invalid_argument("pattern literal: expected '" + std::string(1, c) +
                                  "' at position " + std::to_string(i));
    ++i;
  };
  expect('[');
  skip_ws();
  while (i < text.size() && text[i] != ']') {
    expect('[');
    std::vector<int> module;
    skip_ws();
    while (i < text.size() && text[i] != ']') {
      std::string name;
      while (i < text.size() && text[i] != ',' && text[i] != ']' &&
             !std::isspace(static_cast<unsigned char>(text[i])))
        name += text[i++];
      if (name.empty()) throw std::invalid_argument("pattern literal: empty neuron name");
      module.push_back(resolve(name));
      skip_ws();
      if (i < text.size() && text[i] == ',') {
        ++i;
        skip_ws();
      }
    }
    expect(']');
    p.modules.push_back(std::move(module));
    skip_ws();
    if (i < text.size() && text[i] == ',') {
      ++i;
      skip_ws();
    }
  }
  expect(']');
  skip_ws();
  if (i != text.size()) throw std::invalid_argument("pattern literal: trailing characters");
  p.validate();
  return p;
}

template <typename NameFn>
std::string format_pattern(const DecompPattern& p, NameFn&& name_of) {
  std::string out = "[";
  for (std::size_t c = 0; c < p.modules.size(); ++c) {
    if (c) out += ",";
    out += "[";
    for (std::size_t k = 0; k < p.modules[c].size(); ++k) {
      if (k) out += ",";
      out += name_of(p.modules[c][k]);
    }
    out += "]";
  }
  out += "]";
  return out;
}

}  // namespace sne
