#include <doctest.h>

#include "sne/diversity.hpp"

using namespace sne;

TEST_CASE("identical descriptors score zero") {
  PopulationDescriptors d;
  d.patterns = {{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}};
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(diversity_score(i, d, DiversityMetric::modular) == doctest::Approx(0.0));

  BehaviorVector b;
  d.behaviors = {b, b, b};
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(diversity_score(i, d, DiversityMetric::behavioral) == doctest::Approx(0.0));
}

TEST_CASE("complementary behavior vectors score 0.5 in a pair") {
  BehaviorVector a, b;
  for (int p = 0; p < 256; ++p) b.set(p);
  PopulationDescriptors d;
  d.behaviors = {a, b};
  CHECK(diversity_score(0, d, DiversityMetric::behavioral) == doctest::Approx(0.5));
  CHECK(diversity_score(1, d, DiversityMetric::behavioral) == doctest::Approx(0.5));
}

TEST_CASE("three-individual modular example") {
  // p, p, q with delta(p,q) = delta(q,p) = 0.5
  std::vector<int> p{0, 0, 1, 1};
  std::vector<int> q{0, 1, 0, 1};
  REQUIRE(delta_decomp_dense(p, q) == doctest::Approx(0.5));
  REQUIRE(delta_decomp_dense(q, p) == doctest::Approx(0.5));
  PopulationDescriptors d;
  d.patterns = {p, p, q};
  CHECK(diversity_score(0, d, DiversityMetric::modular) == doctest::Approx(0.5 / 3.0));
  CHECK(diversity_score(1, d, DiversityMetric::modular) == doctest::Approx(0.5 / 3.0));
  CHECK(diversity_score(2, d, DiversityMetric::modular) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("missing descriptor is an indexing error") {
  PopulationDescriptors d;
  d.patterns = {{0, 1}};
  CHECK_THROWS_AS(diversity_score(1, d, DiversityMetric::modular), std::out_of_range);
}

TEST_CASE("scores stay in [0,1] and duplicates never raise a score") {
  Rng rng{31};
  for (int trial = 0; trial < 100; ++trial) {
    PopulationDescriptors d;
    const int n = 2 + static_cast<int>(rng.index(6));
    for (int i = 0; i < n; ++i) {
      std::vector<int> colors(5);
      for (int& c : colors) c = static_cast<int>(rng.index(3));
      // dense labels by first occurrence
      std::vector<int> remap(3, -1);
      int k = 0;
      for (int& c : colors) {
        if (remap[c] < 0) remap[c] = k++;
        c = remap[c];
      }
      d.patterns.push_back(colors);
    }
    const std::size_t target = rng.index(d.patterns.size());
    const double before = diversity_score(target, d, DiversityMetric::modular);
    CHECK(before >= 0.0);
    CHECK(before <= 1.0);
    d.patterns.push_back(d.patterns[target]);  // exact duplicate of target
    const double after = diversity_score(target, d, DiversityMetric::modular);
    CHECK(after <= before + 1e-12);
  }
}
