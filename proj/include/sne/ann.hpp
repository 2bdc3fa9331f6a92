#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sne/graph.hpp"
#include "sne/rng.hpp"

namespace sne {

// Layered feed-forward architecture. Node ids are layer-major:
// layer 0 first, then layer 1, etc.
struct ArchSpec {
  std::vector<int> layer_sizes{8, 8, 4, 2, 1};
  double lambda = 20.0;
  std::vector<int> weight_values{-2, -1, 1, 2};
  std::vector<int> bias_values{-2, -1, 0, 1, 2};

  int layer_count() const { return static_cast<int>(layer_sizes.size()); }

  int node_count() const {
    return std::accumulate(layer_sizes.begin(), layer_sizes.end(), 0);
  }

  int input_count() const { return layer_sizes.front(); }
  int output_count() const { return layer_sizes.back(); }

  // id of the first node in a layer
  int layer_offset(int layer) const {
    int off = 0;
    for (int l = 0; l < layer; ++l) off += layer_sizes[l];
    return off;
  }

  int layer_of(int node) const {
    int off = 0;
    for (int l = 0; l < layer_count(); ++l) {
      off += layer_sizes[l];
      if (node < off) return l;
    }
    throw std::out_of_range("node id out of range");
  }

  // count of feasible adjacent-layer connections
  int max_connections() const {
    int total = 0;
    for (int l = 0; l + 1 < layer_count(); ++l)
      total += layer_sizes[l] * layer_sizes[l + 1];
    return total;
  }

  // inputs: i1..iN, output layer: o1..oM, hidden layer l: h<l>_<k>
  std::string node_name(int id) const {
    int layer = layer_of(id);
    int pos = id - layer_offset(layer) + 1;
    if (layer == 0) return "i" + std::to_string(pos);
    if (layer == layer_count() - 1) return "o" + std::to_string(pos);
    return "h" + std::to_string(layer) + "_" + std::to_string(pos);
  }

  int node_id(const std::string& name) const {
    for (int id = 0; id < node_count(); ++id)
      if (node_name(id) == name) return id;
    throw std::invalid_argument("unknown neuron name: " + name);
  }

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("arch: need at least 2 layers");
    for (int s : layer_sizes)
      if (s <= 0) throw std::invalid_argument("arch: layer sizes must be positive");
    if (weight_values.empty() || bias_values.empty())
      throw std::invalid_argument("arch: empty value set");
    for (int w : weight_values)
      if (w == 0) throw std::invalid_argument("arch: weight value 0 not allowed");
  }
};

struct Conn {
  int src = 0;
  int dst = 0;
  int weight = 0;

  friend bool operator==(const Conn&, const Conn&) = default;
};

inline bool conn_less(const Conn& a, const Conn& b) {
  return a.src != b.src ? a.src < b.src : a.dst < b.dst;
}

// Direct-encoded genome: connection list (sorted by src, dst; adjacent
// layers only) plus one bias per non-input node.
struct Genome {
  std::shared_ptr<const ArchSpec> arch;
  std::vector<Conn> conns;
  std::vector<int> biases;  // indexed by node - input_count

  bool operator==(const Genome& o) const {
    return conns == o.conns && biases == o.biases;
  }

  bool has_conn(int src, int dst) const {
    Conn key{src, dst, 0};
    auto it = std::lower_bound(conns.begin(), conns.end(), key, conn_less);
    return it != conns.end() && it->src == src && it->dst == dst;
  }

  int bias_of(int node) const { return biases.at(node - arch->input_count()); }

  void validate() const {
    const ArchSpec& a = *arch;
    if (static_cast<int>(biases.size()) != a.node_count() - a.input_count())
      throw std::invalid_argument("genome: bias count mismatch");
    for (std::size_t i = 0; i + 1 < conns.size(); ++i)
      if (!conn_less(conns[i], conns[i + 1]))
        throw std::invalid_argument("genome: connections not sorted/unique");
    for (const Conn& c : conns) {
      if (a.layer_of(c.dst) != a.layer_of(c.src) + 1)
        throw std::invalid_argument("genome: connection between non-adjacent layers");
      if (std::find(a.weight_values.begin(), a.weight_values.end(), c.weight) ==
          a.weight_values.end())
        throw std::invalid_argument("genome: weight outside allowed set");
    }
    for (int b : biases)
      if (std::find(a.bias_values.begin(), a.bias_values.end(), b) == a.bias_values.end())
        throw std::invalid_argument("genome: bias outside allowed set");
  }
};

struct MutationConfig {
  double p_add_conn = 0.2;
  double p_remove_conn = 0.2;
  double p_move_conn = 0.2;
  double p_weight_change = 0.05;  // per existing connection
  double p_bias_change = 0.05;    // per non-input node
};

// Feed-forward pass. Each non-input node outputs tanh(lambda * (sum + bias));
// a node with no incoming connections outputs tanh(lambda * bias).
inline std::vector<double> evaluate(const Genome& g, std::span<const double> input) {
  const ArchSpec& a = *g.arch;
  if (static_cast<int>(input.size()) != a.input_count())
    throw std::invalid_argument("evaluate: input length mismatch");

  std::vector<double> act(a.node_count(), 0.0);
  std::copy(input.begin(), input.end(), act.begin());

  std::vector<double> acc(a.node_count(), 0.0);
  for (int n = a.input_count(); n < a.node_count(); ++n)
    acc[n] = static_cast<double>(g.biases[n - a.input_count()]);

  // conns are sorted by src, and every connection spans exactly one layer,
  // so a single sweep per layer sees all of that layer's outgoing edges
  std::size_t ci = 0;
  for (int layer = 0; layer + 1 < a.layer_count(); ++layer) {
    const int layer_end = a.layer_offset(layer + 1);
    while (ci < g.conns.size() && g.conns[ci].src < layer_end) {
      const Conn& c = g.conns[ci];
      acc[c.dst] += static_cast<double>(c.weight) * act[c.src];
      ++ci;
    }
    const int next_end = layer_end + a.layer_sizes[layer + 1];
    for (int n = layer_end; n < next_end; ++n) act[n] = std::tanh(a.lambda * acc[n]);
  }

  return {act.end() - a.output_count(), act.end()};
}

namespace detail {

// all feasible connections in canonical (src, dst) order
inline void for_each_feasible(const ArchSpec& a, auto&& fn) {
  for (int layer = 0; layer + 1 < a.layer_count(); ++layer) {
    const int src0 = a.layer_offset(layer);
    const int dst0 = a.layer_offset(layer + 1);
    for (int s = src0; s < src0 + a.layer_sizes[layer]; ++s)
      for (int d = dst0; d < dst0 + a.layer_sizes[layer + 1]; ++d) fn(s, d);
  }
}

inline std::vector<std::pair<int, int>> absent_connections(const Genome& g) {
  std::vector<std::pair<int, int>> absent;
  for_each_feasible(*g.arch, [&](int s, int d) {
    if (!g.has_conn(s, d)) absent.emplace_back(s, d);
  });
  return absent;
}

}  // namespace detail

inline Genome random_genome(Rng& rng, std::shared_ptr<const ArchSpec> arch, double p_init) {
  if (p_init < 0.0 || p_init > 1.0) throw std::invalid_argument("p_init outside [0,1]");
  Genome g;
  g.arch = std::move(arch);
  detail::for_each_feasible(*g.arch, [&](int s, int d) {
    if (rng.bernoulli(p_init)) g.conns.push_back({s, d, rng.pick(g.arch->weight_values)});
  });
  const int n_biased = g.arch->node_count() - g.arch->input_count();
  g.biases.reserve(n_biased);
  for (int i = 0; i < n_biased; ++i) g.biases.push_back(rng.pick(g.arch->bias_values));
  return g;
}

// Structural and parametric mutation. Operations that cannot apply
// (add on a full genome, remove on an empty one) are silently skipped.
// A moved connection gets a freshly drawn weight.
inline Genome mutate(const Genome& parent, Rng& rng, const MutationConfig& cfg) {
  Genome g = parent;
  const ArchSpec& a = *g.arch;

  auto add_random = [&] {
    auto absent = detail::absent_connections(g);
    if (absent.empty()) return;
    auto [s, d] = absent[rng.index(absent.size())];
    Conn c{s, d, rng.pick(a.weight_values)};
    g.conns.insert(std::lower_bound(g.conns.begin(), g.conns.end(), c, conn_less), c);
  };
  auto remove_random = [&] {
    if (g.conns.empty()) return;
    g.conns.erase(g.conns.begin() + static_cast<std::ptrdiff_t>(rng.index(g.conns.size())));
  };

  if (rng.bernoulli(cfg.p_add_conn)) add_random();
  if (rng.bernoulli(cfg.p_remove_conn)) remove_random();
  if (rng.bernoulli(cfg.p_move_conn) && !g.conns.empty()) {
    remove_random();
    add_random();
  }
  for (Conn& c : g.conns)
    if (rng.bernoulli(cfg.p_weight_change)) c.weight = rng.pick(a.weight_values);
  for (int& b : g.biases)
    if (rng.bernoulli(cfg.p_bias_change)) b = rng.pick(a.bias_values);
  return g;
}

// Undirected view of the genome for modularity analysis. Node ids are
// stable across calls (layer-major order), one edge per connection.
inline Graph to_graph(const Genome& g) {
  Graph gr;
  gr.node_count = g.arch->node_count();
  gr.edges.reserve(g.conns.size());
  for (const Conn& c : g.conns) gr.add_edge(c.src, c.dst);
  return gr;
}

// --- genome dump/load: plain key-value text -------------------------------

inline void dump_genome(const Genome& g, std::ostream& os) {
  const ArchSpec& a = *g.arch;
  os << "layers:";
  for (int s : a.layer_sizes) os << ' ' << s;
  os << '\n';
  std::ostringstream lam;
  lam.precision(17);
  lam << a.lambda;
  os << "lambda: " << lam.str() << '\n';
  os << "weight_values:";
  for (int w : a.weight_values) os << ' ' << w;
  os << '\n';
  os << "bias_values:";
  for (int b : a.bias_values) os << ' ' << b;
  os << '\n';
  for (int n = a.input_count(); n < a.node_count(); ++n)
    os << "bias: " << a.node_name(n) << ' ' << g.biases[n - a.input_count()] << '\n';
  for (const Conn& c : g.conns)
    os << "conn: " << a.node_name(c.src) << ' ' << a.node_name(c.dst) << ' ' << c.weight
       << '\n';
}

inline Genome load_genome(std::istream& is) {
  auto spec = std::make_shared<ArchSpec>();
  spec->layer_sizes.clear();
  spec->weight_values.clear();
  spec->bias_values.clear();

  std::vector<std::tuple<std::string, std::string, int>> conn_lines;
  std::vector<std::pair<std::string, int>> bias_lines;
  std::string line;
  int lineno = 0;
  bool have_layers = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto fail = [&](const std::string& what) -> std::runtime_error {
      return std::runtime_error("genome line " + std::to_string(lineno) + ": " + what);
    };
    if (key == "layers:") {
      int v;
      while (ss >> v) spec->layer_sizes.push_back(v);
      have_layers = true;
    } else if (key == "lambda:") {
      if (!(ss >> spec->lambda)) throw fail("bad lambda");
    } else if (key == "weight_values:") {
      int v;
      while (ss >> v) spec->weight_values.push_back(v);
    } else if (key == "bias_values:") {
      int v;
      while (ss >> v) spec->bias_values.push_back(v);
    } else if (key == "bias:") {
      std::string name;
      int v;
      if (!(ss >> name >> v)) throw fail("bad bias line");
      bias_lines.emplace_back(name, v);
    } else if (key == "conn:") {
      std::string sname, dname;
      int w;
      if (!(ss >> sname >> dname >> w)) throw fail("bad conn line");
      conn_lines.emplace_back(sname, dname, w);
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!have_layers) throw std::runtime_error("genome: missing 'layers:' line");
  spec->validate();

  Genome g;
  g.arch = spec;
  g.biases.assign(spec->node_count() - spec->input_count(), 0);
  std::vector<bool> bias_seen(g.biases.size(), false);
  for (auto& [name, v] : bias_lines) {
    int id = spec->node_id(name);
    if (id < spec->input_count())
      throw std::runtime_error("genome: bias on input neuron " + name);
    g.biases[id - spec->input_count()] = v;
    bias_seen[id - spec->input_count()] = true;
  }
  for (std::size_t i = 0; i < bias_seen.size(); ++i)
    if (!bias_seen[i])
      throw std::runtime_error("genome: missing bias for " +
                               spec->node_name(static_cast<int>(i) + spec->input_count()));
  for (auto& [sname, dname, w] : conn_lines)
    g.conns.push_back({spec->node_id(sname), spec->node_id(dname), w});
  std::sort(g.conns.begin(), g.conns.end(), conn_less);
  g.validate();
  return g;
}

}  // namespace sne
