#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sne/rng.hpp"

namespace sne {

struct SampleSet {
  std::string label;
  std::vector<double> values;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct MannWhitneyResult {
  double u_a = 0.0;  // U statistic of the first sample
  double u_b = 0.0;
  double p = 1.0;  // two-sided
};

namespace detail {

// P(U <= u) of the exact null distribution for untied samples, via the
// standard count recurrence f(n, m, u) = f(n-1, m, u-m) + f(n, m-1, u).
inline double exact_u_cdf(int n, int m, double u_value) {
  const int umax = n * m;
  // counts[u] for growing second-sample size
  std::vector<std::vector<double>> f(n + 1, std::vector<double>(umax + 1, 0.0));
  // base: n = 0 -> only u = 0
  // iterate m from 0 upward, updating all n
  std::vector<std::vector<double>> prev(n + 1, std::vector<double>(umax + 1, 0.0));
  for (int i = 0; i <= n; ++i) prev[i][0] = 1.0;  // m = 0
  for (int mm = 1; mm <= m; ++mm) {
    for (int u = 0; u <= umax; ++u) f[0][u] = (u == 0) ? 1.0 : 0.0;
    for (int nn = 1; nn <= n; ++nn)
      for (int u = 0; u <= umax; ++u) {
        double c = prev[nn][u];  // f(nn, mm-1, u)
        if (u >= mm) c += f[nn - 1][u - mm];
        f[nn][u] = c;
      }
    std::swap(prev, f);
  }
  double total = 0.0, below = 0.0;
  for (int u = 0; u <= umax; ++u) {
    total += prev[n][u];
    if (u <= u_value + 1e-9) below += prev[n][u];
  }
  return below / total;
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

// Rank-sum U with midrank tie handling. Exact p by enumeration when
// n_a * n_b <= 400 and the pooled sample has no ties, otherwise the normal
// approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  const int n_a = static_cast<int>(a.size());
  const int n_b = static_cast<int>(b.size());
  if (n_a == 0 || n_b == 0) throw std::invalid_argument("mann_whitney_u: empty sample");

  struct Entry {
    double value;
    int group;
  };
  std::vector<Entry> pooled;
  pooled.reserve(a.size() + b.size());
  for (double v : a) pooled.push_back({v, 0});
  for (double v : b) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end(),
            [](const Entry& x, const Entry& y) { return x.value < y.value; });

  const int n = n_a + n_b;
  double rank_sum_a = 0.0;
  bool has_ties = false;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && pooled[j].value == pooled[i].value) ++j;
    const int t = j - i;
    const double midrank = (i + 1 + j) / 2.0;  // average of ranks i+1..j
    for (int k = i; k < j; ++k)
      if (pooled[k].group == 0) rank_sum_a += midrank;
    if (t > 1) {
      has_ties = true;
      tie_term += static_cast<double>(t) * t * t - t;
    }
    i = j;
  }

  MannWhitneyResult r;
  r.u_a = rank_sum_a - n_a * (n_a + 1) / 2.0;
  r.u_b = static_cast<double>(n_a) * n_b - r.u_a;

  const double u_min = std::min(r.u_a, r.u_b);
  if (!has_ties && n_a * n_b <= 400) {
    r.p = std::min(1.0, 2.0 * detail::exact_u_cdf(n_a, n_b, u_min));
  } else {
    const double mu = static_cast<double>(n_a) * n_b / 2.0;
    const double var = (static_cast<double>(n_a) * n_b / 12.0) *
                       ((n + 1) - tie_term / (static_cast<double>(n) * (n - 1)));
    if (var <= 0.0) {
      r.p = 1.0;
    } else {
      const double z = std::max(0.0, std::abs(r.u_a - mu) - 0.5) / std::sqrt(var);
      r.p = std::min(1.0, 2.0 * detail::normal_sf(z));
    }
  }
  return r;
}

inline MannWhitneyResult mann_whitney_u(const SampleSet& a, const SampleSet& b) {
  return mann_whitney_u(std::span<const double>(a.values), std::span<const double>(b.values));
}

// Percentile bootstrap confidence interval for the sample median.
// Deterministic per rng seed.
inline std::pair<double, double> bootstrap_median_ci(std::span<const double> x,
                                                     int resamples, double level, Rng& rng) {
  if (x.empty()) throw std::invalid_argument("bootstrap_median_ci: empty sample");
  if (resamples < 1) throw std::invalid_argument("bootstrap_median_ci: need resamples >= 1");
  std::vector<double> medians(resamples);
  std::vector<double> draw(x.size());
  for (int r = 0; r < resamples; ++r) {
    for (double& v : draw) v = x[rng.index(x.size())];
    medians[r] = median(draw);
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const double pos = q * (medians.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, medians.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return medians[lo] * (1.0 - frac) + medians[hi] * frac;
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

inline std::pair<double, double> bootstrap_median_ci(const SampleSet& x, Rng& rng,
                                                     int resamples = 5000, double level = 0.95) {
  return bootstrap_median_ci(std::span<const double>(x.values), resamples, level, rng);
}

}  // namespace sne
