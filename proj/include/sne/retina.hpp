#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sne/ann.hpp"
#include "sne/rng.hpp"

namespace sne {

// Thresholded network outputs over all 256 retina inputs, in ascending
// pattern order. Bit k = 1 iff the output for pattern k is positive.
struct BehaviorVector {
  std::array<std::uint64_t, 4> bits{};

  bool get(int k) const { return (bits[k >> 6] >> (k & 63)) & 1u; }
  void set(int k) { bits[k >> 6] |= std::uint64_t{1} << (k & 63); }

  int hamming(const BehaviorVector& o) const {
    int d = 0;
    for (int w = 0; w < 4; ++w) d += std::popcount(bits[w] ^ o.bits[w]);
    return d;
  }

  bool operator==(const BehaviorVector& o) const = default;
};

// The 8-bit retina classification task. In modular mode a pattern is a
// target iff its left nibble and its right nibble are both half-targets;
// in nonmodular mode targets are an explicit set of 64 8-bit patterns.
//
// Bit convention: input neuron i1 carries the most significant bit of the
// pattern, i8 the least significant; the left half is i1..i4 (high nibble).
struct RetinaTask {
  enum class Mode { modular, nonmodular };

  Mode mode = Mode::modular;
  std::array<bool, 16> left{};
  std::array<bool, 16> right{};
  std::array<bool, 256> global{};

  bool classify(int pattern) const {
    if (pattern < 0 || pattern > 255) throw std::invalid_argument("classify: bad pattern");
    if (mode == Mode::modular) return left[(pattern >> 4) & 15] && right[pattern & 15];
    return global[pattern];
  }

  // target-set membership as a 256-bit mask, aligned with BehaviorVector
  BehaviorVector target_mask() const {
    BehaviorVector m;
    for (int p = 0; p < 256; ++p)
      if (classify(p)) m.set(p);
    return m;
  }

  int target_count() const {
    int n = 0;
    for (int p = 0; p < 256; ++p) n += classify(p);
    return n;
  }
};

// ±1 input encoding of an 8-bit pattern (bit 7 -> i1, ..., bit 0 -> i8)
inline std::array<double, 8> encode_pattern(int pattern) {
  std::array<double, 8> in;
  for (int j = 0; j < 8; ++j) in[j] = ((pattern >> (7 - j)) & 1) ? 1.0 : -1.0;
  return in;
}

// Presents patterns 0..255 in ascending order; bit = 1 iff output > 0.
// The task argument is part of the descriptor interface but the vector
// depends on the genome's behavior only.
//
// Fast path: weights and biases are integers and inputs are ±1, so every
// preactivation is an integer k; for lambda >= 19, tanh(lambda * k) rounds
// to exactly -1, 0 or +1 in double precision. The whole pass then reduces
// to integer sign propagation, evaluated for all 256 patterns in one batch
// (bit-identical to the per-pattern evaluate() path, see unit tests).
inline BehaviorVector behavior_vector(const Genome& g, const RetinaTask&) {
  const ArchSpec& a = *g.arch;
  if (a.input_count() != 8 || a.output_count() != 1)
    throw std::invalid_argument("behavior_vector: retina genomes need 8 inputs and 1 output");

  BehaviorVector bv;
  if (a.lambda < 19.0) {
    for (int p = 0; p < 256; ++p)
      if (evaluate(g, encode_pattern(p))[0] > 0.0) bv.set(p);
    return bv;
  }

  std::vector<std::array<std::int16_t, 256>> act(a.node_count());
  for (int j = 0; j < 8; ++j)
    for (int p = 0; p < 256; ++p) act[j][p] = ((p >> (7 - j)) & 1) ? 1 : -1;
  for (int n = a.input_count(); n < a.node_count(); ++n)
    act[n].fill(static_cast<std::int16_t>(g.biases[n - a.input_count()]));

  std::size_t ci = 0;
  for (int layer = 0; layer + 1 < a.layer_count(); ++layer) {
    const int layer_end = a.layer_offset(layer + 1);
    while (ci < g.conns.size() && g.conns[ci].src < layer_end) {
      const Conn& c = g.conns[ci];
      const std::int16_t w = static_cast<std::int16_t>(c.weight);
      for (int p = 0; p < 256; ++p)
        act[c.dst][p] = static_cast<std::int16_t>(act[c.dst][p] + w * act[c.src][p]);
      ++ci;
    }
    const int next_end = layer_end + a.layer_sizes[layer + 1];
    for (int n = layer_end; n < next_end; ++n)
      for (int p = 0; p < 256; ++p)
        act[n][p] = static_cast<std::int16_t>((act[n][p] > 0) - (act[n][p] < 0));
  }

  const auto& out = act[a.node_count() - 1];
  for (int p = 0; p < 256; ++p)
    if (out[p] > 0) bv.set(p);
  return bv;
}

// fitness = 1 - errorCount/256; an output of exactly 0 counts as false.
inline double fitness_from_behavior(const BehaviorVector& bv, const RetinaTask& task) {
  const int errors = bv.hamming(task.target_mask());
  return 1.0 - static_cast<double>(errors) / 256.0;
}

inline double fitness(const Genome& g, const RetinaTask& task) {
  return fitness_from_behavior(behavior_vector(g, task), task);
}

// 64 distinct targets drawn uniformly from the 256 patterns.
inline RetinaTask make_nonmodular_task(Rng& rng) {
  RetinaTask task;
  task.mode = RetinaTask::Mode::nonmodular;
  std::vector<int> ids(256);
  for (int i = 0; i < 256; ++i) ids[i] = i;
  for (int i = 0; i < 64; ++i) {
    const std::size_t j = i + rng.index(ids.size() - i);
    std::swap(ids[i], ids[j]);
    task.global[ids[i]] = true;
  }
  return task;
}

namespace detail {

inline int parse_bits(const std::string& s, int width, int lineno) {
  if (static_cast<int>(s.size()) != width)
    throw std::runtime_error("pattern file line " + std::to_string(lineno) + ": expected " +
                             std::to_string(width) + "-bit string, got '" + s + "'");
  int v = 0;
  for (char c : s) {
    if (c != '0' && c != '1')
      throw std::runtime_error("pattern file line " + std::to_string(lineno) +
                               ": malformed bit string '" + s + "'");
    v = (v << 1) | (c - '0');
  }
  return v;
}

}  // namespace detail

// Plain-text task description. Modular tasks list 8 left and 8 right
// 4-bit half-patterns under `left:` / `right:` headers; nonmodular tasks
// list 64 8-bit patterns under `targets:`.
inline RetinaTask load_task(std::istream& is) {
  RetinaTask task;
  enum class Section { none, left, right, targets } section = Section::none;
  int n_left = 0, n_right = 0, n_targets = 0;
  bool saw_half = false, saw_targets = false;

  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    std::string tok = line.substr(start, end - start + 1);
    if (tok[0] == '#') continue;
    if (tok == "left:") {
      section = Section::left;
      saw_half = true;
      continue;
    }
    if (tok == "right:") {
      section = Section::right;
      saw_half = true;
      continue;
    }
    if (tok == "targets:") {
      section = Section::targets;
      saw_targets = true;
      continue;
    }
    switch (section) {
      case Section::none:
        throw std::runtime_error("pattern file line " + std::to_string(lineno) +
                                 ": pattern before any section header");
      case Section::left: {
        const int v = detail::parse_bits(tok, 4, lineno);
        if (task.left[v])
          throw std::runtime_error("pattern file line " + std::to_string(lineno) +
                                   ": duplicate left pattern '" + tok + "'");
        task.left[v] = true;
        ++n_left;
        break;
      }
      case Section::right: {
        const int v = detail::parse_bits(tok, 4, lineno);
        if (task.right[v])
          throw std::runtime_error("pattern file line " + std::to_string(lineno) +
                                   ": duplicate right pattern '" + tok + "'");
        task.right[v] = true;
        ++n_right;
        break;
      }
      case Section::targets: {
        const int v = detail::parse_bits(tok, 8, lineno);
        if (task.global[v])
          throw std::runtime_error("pattern file line " + std::to_string(lineno) +
                                   ": duplicate target pattern '" + tok + "'");
        task.global[v] = true;
        ++n_targets;
        break;
      }
    }
  }

  if (saw_half && saw_targets)
    throw std::runtime_error("pattern file: mixes left/right and targets sections");
  if (saw_targets) {
    task.mode = RetinaTask::Mode::nonmodular;
    if (n_targets != 64)
      throw std::runtime_error("pattern file: expected 64 target patterns, got " +
                               std::to_string(n_targets));
    return task;
  }
  task.mode = RetinaTask::Mode::modular;
  if (n_left != 8)
    throw std::runtime_error("pattern file: expected 8 left patterns, got " +
                             std::to_string(n_left));
  if (n_right != 8)
    throw std::runtime_error("pattern file: expected 8 right patterns, got " +
                             std::to_string(n_right));
  return task;
}

inline RetinaTask load_task_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open pattern file: " + path);
  return load_task(f);
}

}  // namespace sne
