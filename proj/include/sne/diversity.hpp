#pragma once

#include <stdexcept>
#include <vector>

#include "sne/decomp.hpp"
#include "sne/retina.hpp"

namespace sne {

enum class DiversityMetric { modular, behavioral };

// One descriptor per individual. Modular descriptors are dense color
// vectors over a shared measured-neuron ordering; behavioral descriptors
// are 256-bit retina behavior vectors.
struct PopulationDescriptors {
  std::vector<std::vector<int>> patterns;
  std::vector<BehaviorVector> behaviors;

  std::size_t size(DiversityMetric m) const {
    return m == DiversityMetric::modular ? patterns.size() : behaviors.size();
  }
};

// Average distance of individual i to the population (self term included,
// contributing 0). Modular distance d(x_i, x_j) treats i as the evolved
// pattern and j as the compared one; behavioral distance is Hamming / 256.
inline double diversity_score(std::size_t i, const PopulationDescriptors& d,
                              DiversityMetric metric) {
  const std::size_t n = d.size(metric);
  if (i >= n) throw std::out_of_range("diversity_score: missing descriptor");
  double sum = 0.0;
  if (metric == DiversityMetric::modular) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum += delta_decomp_dense(d.patterns[i], d.patterns[j]);
    }
  } else {
    for (std::size_t j = 0; j < n; ++j)
      sum += static_cast<double>(d.behaviors[i].hamming(d.behaviors[j])) / 256.0;
  }
  return sum / static_cast<double>(n);
}

inline std::vector<double> diversity_scores(const PopulationDescriptors& d,
                                            DiversityMetric metric) {
  const std::size_t n = d.size(metric);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = diversity_score(i, d, metric);
  return out;
}

}  // namespace sne
