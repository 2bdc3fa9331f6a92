#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

namespace sne {

// Simple undirected graph: node ids 0..node_count-1, edge list with
// no self-loops and no multi-edges. Edges are stored with u < v.
struct Graph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;

  void add_edge(int u, int v) {
    if (u == v) throw std::invalid_argument("graph: self-loop");
    if (u > v) std::swap(u, v);
    edges.emplace_back(u, v);
  }

  int edge_count() const { return static_cast<int>(edges.size()); }

  std::vector<int> degrees() const {
    std::vector<int> deg(node_count, 0);
    for (auto [u, v] : edges) {
      ++deg[u];
      ++deg[v];
    }
    return deg;
  }

  void validate() const {
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || u >= node_count || v >= node_count)
        throw std::invalid_argument("graph: edge endpoint out of range");
      if (u == v) throw std::invalid_argument("graph: self-loop");
    }
  }
};

}  // namespace sne
