#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

// 1% critical value of the two-sample KS test.
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
  return 1.62762 * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

#include <Eigen/Dense>
#include <limits>
#include <numeric>

// Exhaustive transportation-problem optimum for small instances: every basic
// feasible solution is a spanning tree of the bipartite row/column graph, so
// enumerate all (R + C - 1)-cell subsets, keep the trees, solve their flows by
// peeling leaves and take the cheapest nonnegative one.
inline double brute_force_ot(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::MatrixXd& cost) {
  const int R = static_cast<int>(p.size()), C = static_cast<int>(q.size());
  const int cells = R * C, need = R + C - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(cells, 0);
  std::fill(pick.end() - need, pick.end(), 1);
  do {
    std::vector<int> chosen;
    for (int i = 0; i < cells; ++i)
      if (pick[i]) chosen.push_back(i);
    // Union-find acyclicity; R + C - 1 acyclic edges on R + C nodes is a tree.
    std::vector<int> parent(R + C);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    bool tree = true;
    for (int c : chosen) {
      const int a = find(c / C), b = find(R + c % C);
      if (a == b) {
        tree = false;
        break;
      }
      parent[a] = b;
    }
    if (!tree) continue;
    std::vector<double> supply(R + C);
    for (int i = 0; i < R; ++i) supply[i] = p[i];
    for (int j = 0; j < C; ++j) supply[R + j] = q[j];
    std::vector<char> done(chosen.size(), 0);
    std::vector<double> flow(chosen.size(), 0.0);
    for (std::size_t round = 0; round < chosen.size(); ++round) {
      std::vector<int> degree(R + C, 0);
      for (std::size_t e = 0; e < chosen.size(); ++e)
        if (!done[e]) {
          ++degree[chosen[e] / C];
          ++degree[R + chosen[e] % C];
        }
      for (std::size_t e = 0; e < chosen.size(); ++e) {
        if (done[e]) continue;
        const int a = chosen[e] / C, b = R + chosen[e] % C;
        if (degree[a] == 1 || degree[b] == 1) {
          const int leaf = degree[a] == 1 ? a : b, other = leaf == a ? b : a;
          flow[e] = supply[leaf];
          supply[other] -= flow[e];
          supply[leaf] = 0.0;
          done[e] = 1;
          break;
        }
      }
    }
    double obj = 0.0;
    bool feasible = true;
    for (std::size_t e = 0; e < chosen.size(); ++e) {
      if (flow[e] < -1e-12) feasible = false;
      obj += flow[e] * cost(chosen[e] / C, chosen[e] % C);
    }
    if (feasible) best = std::min(best, obj);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}
