#include "warpu/transport.hpp"

#include "warpu/errors.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace warpu {

namespace {

struct Cell {
  int i;
  int j;
};

// Nodes 0..m-1 are rows, m..m+n-1 columns.
std::vector<std::vector<int>> adjacency(const std::vector<Cell>& basis, int m, int n) {
  std::vector<std::vector<int>> adj(m + n);
  for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
    adj[basis[e].i].push_back(e);
    adj[m + basis[e].j].push_back(e);
  }
  return adj;
}

int other_end(const Cell& c, int node, int m) { return node < m ? m + c.j : c.i; }

// Flows on a spanning tree are fixed by the marginals; peel leaves.
std::vector<double> tree_flows(const std::vector<Cell>& basis, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  const int m = static_cast<int>(p.size()), n = static_cast<int>(q.size());
  const auto adj = adjacency(basis, m, n);
  std::vector<double> rest(m + n);
  for (int i = 0; i < m; ++i) rest[i] = p[i];
  for (int j = 0; j < n; ++j) rest[m + j] = q[j];
  std::vector<int> degree(m + n);
  for (int v = 0; v < m + n; ++v) degree[v] = static_cast<int>(adj[v].size());
  std::vector<char> used(basis.size(), 0);
  std::vector<double> flow(basis.size(), 0.0);
  std::queue<int> leaves;
  for (int v = 0; v < m + n; ++v)
    if (degree[v] == 1) leaves.push(v);
  while (!leaves.empty()) {
    const int v = leaves.front();
    leaves.pop();
    if (degree[v] != 1) continue;
    int e = -1;
    for (int x : adj[v])
      if (!used[x]) e = x;
    if (e < 0) continue;
    used[e] = 1;
    const double f = std::max(0.0, rest[v]);
    flow[e] = f;
    const int w = other_end(basis[e], v, m);
    rest[v] -= f;
    rest[w] -= f;
    --degree[v];
    if (--degree[w] == 1) leaves.push(w);
  }
  return flow;
}

}  // namespace

TransportPlan discrete_ot_coupling(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::MatrixXd& cost) {
  const int m = static_cast<int>(p.size()), n = static_cast<int>(q.size());
  if (m == 0 || n == 0) throw InputError("OT: empty marginal");
  if (cost.rows() != m || cost.cols() != n) throw InputError("OT: cost shape does not match marginals");
  if (!cost.allFinite() || (cost.array() < 0.0).any()) throw InputError("OT: cost must be finite and nonnegative");
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) throw InputError("OT: marginals must be nonnegative");
  if (std::abs(p.sum() - 1.0) > 1e-9 || std::abs(q.sum() - 1.0) > 1e-9) throw InputError("OT: marginals must sum to one");

  // North-west corner: each allocation advances exactly one index, which
  // yields m + n - 1 cells forming a spanning tree even under degeneracy.
  std::vector<Cell> basis;
  std::vector<double> flow;
  {
    Eigen::VectorXd a = p, b = q;
    int i = 0, j = 0;
    while (i < m && j < n) {
      const double x = std::min(a[i], b[j]);
      basis.push_back({i, j});
      flow.push_back(x);
      a[i] -= x;
      b[j] -= x;
      if (i == m - 1)
        ++j;
      else if (j == n - 1)
        ++i;
      else if (a[i] <= b[j])
        ++i;
      else
        ++j;
    }
  }

  const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
  const double eps = 1e-12 * scale;
  const int max_pivots = 50 * (m + n) * std::max(m, n) + 1000;
  std::vector<char> in_basis(static_cast<std::size_t>(m) * n, 0);
  for (const auto& c : basis) in_basis[static_cast<std::size_t>(c.i) * n + c.j] = 1;

  TransportPlan plan;
  std::vector<double> u(m), v(n);
  for (;;) {
    const auto adj = adjacency(basis, m, n);
    // Potentials: u_i + v_j = c_ij on basic cells, u_0 = 0.
    std::vector<char> seen(m + n, 0);
    std::queue<int> bfs;
    u[0] = 0.0;
    seen[0] = 1;
    bfs.push(0);
    while (!bfs.empty()) {
      const int x = bfs.front();
      bfs.pop();
      for (int e : adj[x]) {
        const int y = other_end(basis[e], x, m);
        if (seen[y]) continue;
        seen[y] = 1;
        const Cell& c = basis[e];
        if (y >= m)
          v[c.j] = cost(c.i, c.j) - u[c.i];
        else
          u[c.i] = cost(c.i, c.j) - v[c.j];
        bfs.push(y);
      }
    }
    // Bland: first cell in row-major order with negative reduced cost.
    int ei = -1, ej = -1;
    for (int i = 0; i < m && ei < 0; ++i)
      for (int j = 0; j < n; ++j)
        if (!in_basis[static_cast<std::size_t>(i) * n + j] && cost(i, j) - u[i] - v[j] < -eps) {
          ei = i;
          ej = j;
          break;
        }
    if (ei < 0) break;
    if (++plan.pivots > max_pivots) throw NumericError("OT: pivot limit reached");

    // Tree path from row ei to column ej.
    std::vector<int> parent_edge(m + n, -1);
    std::vector<char> vis(m + n, 0);
    std::queue<int> qq;
    qq.push(ei);
    vis[ei] = 1;
    while (!qq.empty()) {
      const int x = qq.front();
      qq.pop();
      if (x == m + ej) break;
      for (int e : adj[x]) {
        const int y = other_end(basis[e], x, m);
        if (vis[y]) continue;
        vis[y] = 1;
        parent_edge[y] = e;
        qq.push(y);
      }
    }
    // Walk back from the column: first edge gets -, then alternate.
    std::vector<int> minus, plus;
    int node = m + ej;
    bool sign_minus = true;
    while (node != ei) {
      const int e = parent_edge[node];
      (sign_minus ? minus : plus).push_back(e);
      sign_minus = !sign_minus;
      node = other_end(basis[e], node, m);
    }
    double theta = std::numeric_limits<double>::infinity();
    for (int e : minus) theta = std::min(theta, flow[e]);
    int leave = -1;
    std::size_t leave_key = 0;
    for (int e : minus) {
      if (flow[e] <= theta) {
        const std::size_t key = static_cast<std::size_t>(basis[e].i) * n + basis[e].j;
        if (leave < 0 || key < leave_key) {
          leave = e;
          leave_key = key;
        }
      }
    }
    for (int e : minus) flow[e] -= theta;
    for (int e : plus) flow[e] += theta;
    in_basis[leave_key] = 0;
    basis[leave] = {ei, ej};
    flow[leave] = theta;
    in_basis[static_cast<std::size_t>(ei) * n + ej] = 1;
  }

  flow = tree_flows(basis, p, q);
  plan.joint = Eigen::MatrixXd::Zero(m, n);
  for (std::size_t e = 0; e < basis.size(); ++e) plan.joint(basis[e].i, basis[e].j) = flow[e];
  plan.objective = (plan.joint.array() * cost.array()).sum();
  return plan;
}

std::pair<int, int> sample_plan(const Eigen::MatrixXd& joint, double u) {
  const double target = u * joint.sum();
  double acc = 0.0;
  std::pair<int, int> last{-1, -1};
  for (Eigen::Index i = 0; i < joint.rows(); ++i)
    for (Eigen::Index j = 0; j < joint.cols(); ++j) {
      if (joint(i, j) <= 0.0) continue;
      last = {static_cast<int>(i), static_cast<int>(j)};
      acc += joint(i, j);
      if (target <= acc) return last;
    }
  if (last.first < 0) throw NumericError("OT: empty plan");
  return last;
}

}  // namespace warpu
