#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sne/graph.hpp"
#include "sne/rng.hpp"

namespace sne {

// Assignment of graph nodes to modules. Labels are dense, 0..k-1,
// numbered by first occurrence.
struct Partition {
  std::vector<int> module_of;
  double q = 0.0;

  int module_count() const {
    int k = 0;
    for (int m : module_of) k = std::max(k, m + 1);
    return k;
  }
};

inline void relabel_by_first_occurrence(std::vector<int>& module_of) {
  std::vector<int> remap(module_of.size(), -1);
  int next = 0;
  for (int& m : module_of) {
    if (remap[m] < 0) remap[m] = next++;
    m = remap[m];
  }
}

// Newman undirected modularity: Q = sum_c (e_c/m - (d_c/2m)^2).
// Defined as 0 for edgeless graphs.
inline double q_score(const Graph& g, const std::vector<int>& module_of) {
  if (static_cast<int>(module_of.size()) != g.node_count)
    throw std::invalid_argument("q_score: partition size mismatch");
  const double m = static_cast<double>(g.edge_count());
  if (m == 0.0) return 0.0;

  int k = 0;
  for (int mod : module_of) {
    if (mod < 0) throw std::invalid_argument("q_score: negative module label");
    k = std::max(k, mod + 1);
  }
  std::vector<double> intra(k, 0.0), degree(k, 0.0);
  for (auto [u, v] : g.edges) {
    degree[module_of[u]] += 1.0;
    degree[module_of[v]] += 1.0;
    if (module_of[u] == module_of[v]) intra[module_of[u]] += 1.0;
  }
  double q = 0.0;
  for (int c = 0; c < k; ++c) {
    const double d = degree[c] / (2.0 * m);
    q += intra[c] / m - d * d;
  }
  return q;
}

inline double q_score(const Graph& g, const Partition& p) { return q_score(g, p.module_of); }

namespace detail {

// Leading-eigenvector bisection state for one connected working set.
struct SpectralContext {
  int n = 0;                        // total node count of the graph
  double m = 0.0;                   // edge count
  std::vector<double> adj;          // dense adjacency, n*n
  std::vector<double> degree;       // per node

  double b(int i, int j) const { return adj[i * n + j] - degree[i] * degree[j] / (2.0 * m); }
};

constexpr double kEigTol = 1e-10;
constexpr int kEigMaxIter = 10000;
constexpr double kQTol = 1e-12;

// Generalized modularity matrix for a group (Newman 2006): off-diagonal
// entries are B_ij, diagonal entries subtract the group row sum.
inline std::vector<double> group_matrix(const SpectralContext& ctx, const std::vector<int>& group) {
  const int ng = static_cast<int>(group.size());
  std::vector<double> bg(static_cast<std::size_t>(ng) * ng);
  for (int i = 0; i < ng; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < ng; ++j) {
      const double v = ctx.b(group[i], group[j]);
      bg[i * ng + j] = v;
      row_sum += v;
    }
    bg[i * ng + i] -= row_sum;
  }
  return bg;
}

// Power iteration for the leading eigenvector of bg (shifted to make the
// dominant eigenvalue the most positive one). Returns the Rayleigh quotient
// of the unshifted matrix; the vector is written into v.
inline double leading_eigenvector(const std::vector<double>& bg, int ng, std::vector<double>& v) {
  double shift = 0.0;
  for (int i = 0; i < ng; ++i) {
    double row = 0.0;
    for (int j = 0; j < ng; ++j) row += std::abs(bg[i * ng + j]);
    shift = std::max(shift, row);
  }
  v.resize(ng);
  for (int i = 0; i < ng; ++i)
    v[i] = 2.0 * (static_cast<double>(mix64(static_cast<std::uint64_t>(i) + 1) >> 11) * 0x1.0p-53) - 1.0;

  std::vector<double> w(ng);
  for (int iter = 0; iter < kEigMaxIter; ++iter) {
    for (int i = 0; i < ng; ++i) {
      double s = shift * v[i];
      for (int j = 0; j < ng; ++j) s += bg[i * ng + j] * v[j];
      w[i] = s;
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < kEigTol) return -std::numeric_limits<double>::infinity();
    double diff = 0.0;
    for (int i = 0; i < ng; ++i) {
      w[i] /= norm;
      diff = std::max(diff, std::abs(w[i] - v[i]));
    }
    v.swap(w);
    if (diff < kEigTol) break;
  }
  double rayleigh = 0.0;
  for (int i = 0; i < ng; ++i)
    for (int j = 0; j < ng; ++j) rayleigh += v[i] * bg[i * ng + j] * v[j];
  return rayleigh;
}

// Modularity change of splitting the group by sign vector s:
// dQ = (1/4m) s^T B^g s.
inline double split_gain(const SpectralContext& ctx, const std::vector<double>& bg, int ng,
                         const std::vector<int>& s) {
  double acc = 0.0;
  for (int i = 0; i < ng; ++i)
    for (int j = 0; j < ng; ++j) acc += bg[i * ng + j] * s[i] * s[j];
  return acc / (4.0 * ctx.m);
}

// Kernighan-Lin style fine tuning (Newman 2006): repeatedly build a chain
// of single-node flips, each time moving the unmoved node with the best
// gain, then keep the best prefix of the chain. Ties go to the lowest index.
inline void fine_tune(const SpectralContext& ctx, const std::vector<double>& bg, int ng,
                      std::vector<int>& s) {
  bool improved = true;
  while (improved) {
    improved = false;
    std::vector<int> work = s;
    std::vector<bool> moved(ng, false);
    const double q0 = split_gain(ctx, bg, ng, work);
    double running = q0, best = q0;
    std::vector<int> best_state = work;

    for (int step = 0; step < ng; ++step) {
      int pick = -1;
      double pick_delta = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < ng; ++i) {
        if (moved[i]) continue;
        double row = 0.0;
        for (int j = 0; j < ng; ++j)
          if (j != i) row += bg[i * ng + j] * work[j];
        const double delta = -static_cast<double>(work[i]) * row / ctx.m;
        if (delta > pick_delta) {
          pick_delta = delta;
          pick = i;
        }
      }
      work[pick] = -work[pick];
      moved[pick] = true;
      running += pick_delta;
      if (running > best + kQTol) {
        best = running;
        best_state = work;
      }
    }
    if (best > q0 + kQTol) {
      s = best_state;
      improved = true;
    }
  }
}

inline void split_group(const SpectralContext& ctx, const std::vector<int>& group,
                        std::vector<int>& module_of, int& next_label) {
  const int ng = static_cast<int>(group.size());
  if (ng < 2) return;

  const std::vector<double> bg = group_matrix(ctx, group);
  std::vector<double> v;
  const double eig = leading_eigenvector(bg, ng, v);
  if (!(eig > 1e-9)) return;  // no positive leading eigenvalue: indivisible

  // sign tie (|component| within tolerance of 0) goes to the positive side
  std::vector<int> s(ng);
  for (int i = 0; i < ng; ++i) s[i] = v[i] >= -kEigTol ? 1 : -1;
  fine_tune(ctx, bg, ng, s);

  if (split_gain(ctx, bg, ng, s) <= kQTol) return;
  std::vector<int> pos, neg;
  for (int i = 0; i < ng; ++i) (s[i] > 0 ? pos : neg).push_back(group[i]);
  if (pos.empty() || neg.empty()) return;

  const int neg_label = next_label++;
  for (int node : neg) module_of[node] = neg_label;
  split_group(ctx, pos, module_of, next_label);
  split_group(ctx, neg, module_of, next_label);
}

}  // namespace detail

// Approximate max-Q partition: recursive spectral bisection on the
// modularity matrix with Kernighan-Lin fine tuning after each split.
// Deterministic. Isolated nodes always get singleton modules; an edgeless
// graph yields all singletons with Q = 0.
inline Partition best_partition(const Graph& g) {
  Partition p;
  p.module_of.assign(g.node_count, 0);
  if (g.edge_count() == 0) {
    for (int i = 0; i < g.node_count; ++i) p.module_of[i] = i;
    p.q = 0.0;
    return p;
  }

  detail::SpectralContext ctx;
  ctx.n = g.node_count;
  ctx.m = static_cast<double>(g.edge_count());
  ctx.adj.assign(static_cast<std::size_t>(ctx.n) * ctx.n, 0.0);
  ctx.degree.assign(ctx.n, 0.0);
  for (auto [u, v] : g.edges) {
    ctx.adj[u * ctx.n + v] += 1.0;
    ctx.adj[v * ctx.n + u] += 1.0;
    ctx.degree[u] += 1.0;
    ctx.degree[v] += 1.0;
  }

  std::vector<int> connected;
  int next_label = 1;
  for (int i = 0; i < ctx.n; ++i) {
    if (ctx.degree[i] > 0.0) {
      connected.push_back(i);
      p.module_of[i] = 0;
    } else {
      p.module_of[i] = next_label++;  // singleton for isolated nodes
    }
  }
  // all connected nodes start as label 0; isolated ones already split off
  const int root_label = 0;
  (void)root_label;
  detail::split_group(ctx, connected, p.module_of, next_label);

  relabel_by_first_occurrence(p.module_of);
  p.q = q_score(g, p.module_of);
  return p;
}

// Exact max-Q partition by exhaustive set-partition enumeration
// (restricted growth strings). Ties broken by fewest modules, then by
// lexicographically smallest label string. Refuses graphs larger than
// max_nodes (Bell numbers grow too fast beyond that).
inline Partition brute_force_partition(const Graph& g, int max_nodes = 10) {
  const int n = g.node_count;
  if (n > max_nodes)
    throw std::invalid_argument("brute_force_partition: graph exceeds node limit");
  Partition best;
  best.module_of.assign(n, 0);
  if (n == 0) return best;

  std::vector<int> rgs(n, 0);
  best.q = q_score(g, rgs);
  int best_k = 1;

  // iterate restricted growth strings in lexicographic order
  auto max_prefix = [&](int i) {
    int mx = 0;
    for (int j = 0; j < i; ++j) mx = std::max(mx, rgs[j] + 1);
    return mx;
  };
  while (true) {
    int i = n - 1;
    while (i > 0 && rgs[i] >= max_prefix(i)) rgs[i--] = 0;
    if (i == 0) break;
    ++rgs[i];
    const double q = q_score(g, rgs);
    const int k = *std::max_element(rgs.begin(), rgs.end()) + 1;
    if (q > best.q + detail::kQTol ||
        (std::abs(q - best.q) <= detail::kQTol && k < best_k)) {
      best.module_of = rgs;
      best.q = q;
      best_k = k;
    }
  }
  return best;
}

}  // namespace sne
