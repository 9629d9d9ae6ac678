// Copyright 2026 The K-SENSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KSENSE_TESTS_ORACLES_HPP_
#define KSENSE_TESTS_ORACLES_HPP_

// Brute-force reference implementations written straight from the metric
// and loss definitions. No shared code with the library beyond the PRNG.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

namespace ksense::oracle {

using Points = std::vector<std::vector<double>>;

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (long double)(a[k] - b[k]) * (a[k] - b[k]);
  return static_cast<double>(std::sqrt(s));
}

// Mean over anchors with positives of w_i * L_i, raw dot products.
inline double supcon(const Points& z, const std::vector<std::uint32_t>& y, double tau,
                     const std::vector<double>& w) {
  const std::size_t B = z.size();
  long double total = 0;
  int anchors = 0;
  for (std::size_t i = 0; i < B; ++i) {
    int np = 0;
    for (std::size_t j = 0; j < B; ++j) np += (j != i && y[j] == y[i]);
    if (np == 0) continue;
    ++anchors;
    long double denom = 0;
    for (std::size_t a = 0; a < B; ++a) {
      if (a == i) continue;
      long double d = 0;
      for (std::size_t k = 0; k < z[i].size(); ++k) d += (long double)z[i][k] * z[a][k];
      denom += std::exp(d / tau);
    }
    long double li = 0;
    for (std::size_t p = 0; p < B; ++p) {
      if (p == i || y[p] != y[i]) continue;
      long double d = 0;
      for (std::size_t k = 0; k < z[i].size(); ++k) d += (long double)z[i][k] * z[p][k];
      li -= std::log(std::exp(d / tau) / denom);
    }
    total += w[i] * li / np;
  }
  return static_cast<double>(total / anchors);
}

inline double silhouette(const Points& x, const std::vector<std::uint32_t>& y) {
  const std::size_t n = x.size();
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::uint32_t, std::pair<long double, int>> by_class;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& e = by_class[y[j]];
      e.first += euclid(x[i], x[j]);
      e.second += 1;
    }
    if (by_class.find(y[i]) == by_class.end()) continue;  // singleton
    const long double a = by_class[y[i]].first / by_class[y[i]].second;
    long double b = std::numeric_limits<long double>::infinity();
    for (const auto& [c, e] : by_class) {
      if (c != y[i]) b = std::min(b, e.first / e.second);
    }
    const long double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return static_cast<double>(total / n);
}

inline double davies_bouldin(const Points& x, const std::vector<std::uint32_t>& y) {
  std::map<std::uint32_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < x.size(); ++i) members[y[i]].push_back(i);
  std::vector<std::vector<double>> cent;
  std::vector<double> scat;
  for (const auto& [c, idx] : members) {
    std::vector<double> m(x[0].size(), 0.0);
    for (std::size_t i : idx)
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += x[i][k] / idx.size();
    double s = 0;
    for (std::size_t i : idx) s += euclid(x[i], m) / idx.size();
    cent.push_back(m);
    scat.push_back(s);
  }
  double total = 0;
  for (std::size_t i = 0; i < cent.size(); ++i) {
    double worst = 0;
    for (std::size_t j = 0; j < cent.size(); ++j) {
      if (i == j) continue;
      worst = std::max(worst, (scat[i] + scat[j]) / euclid(cent[i], cent[j]));
    }
    total += worst;
  }
  return total / cent.size();
}

inline double f1_pos(const std::vector<std::uint32_t>& p, const std::vector<std::uint32_t>& g) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 1 && g[i] == 1) tp++;
    if (p[i] == 1 && g[i] != 1) fp++;
    if (p[i] != 1 && g[i] == 1) fn++;
  }
  if (tp + fp + fn == 0) return 1.0;
  const double prec = tp + fp > 0 ? tp / (tp + fp) : 0;
  const double rec = tp + fn > 0 ? tp / (tp + fn) : 0;
  return prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
}

// Resampling oracle driven by the standard library's Mersenne Twister, so
// its Monte Carlo noise is independent of the library's stream.
inline double bootstrap_p(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b,
                          const std::vector<std::uint32_t>& g, int resamples,
                          std::uint32_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  int count = 0;
  std::vector<std::uint32_t> ra(g.size()), rb(g.size()), rg(g.size());
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::size_t i = pick(gen);
      ra[k] = a[i];
      rb[k] = b[i];
      rg[k] = g[i];
    }
    if (f1_pos(rb, rg) >= f1_pos(ra, rg)) ++count;
  }
  return static_cast<double>(count) / resamples;
}

}  // namespace ksense::oracle

#endif  // KSENSE_TESTS_ORACLES_HPP_
