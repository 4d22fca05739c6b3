#include "warpu/metrics.hpp"

#include "warpu/errors.hpp"
#include "warpu/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace warpu {

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InputError("wasserstein_1d needs nonempty sets");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  // Walk both step functions; cell edges are i/na and j/nb.
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double ea = (i + 1) / na, eb = (j + 1) / nb;
    const double next = std::min(ea, eb);
    total += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (ea <= next) ++i;
    if (eb <= next) ++j;
  }
  return total;
}

Eigen::VectorXd marginal_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw InputError("marginal_wasserstein: width mismatch");
  Eigen::VectorXd out(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    std::vector<double> x(a.col(j).data(), a.col(j).data() + a.rows());
    std::vector<double> y(b.col(j).data(), b.col(j).data() + b.rows());
    out[j] = wasserstein_1d(std::move(x), std::move(y));
  }
  return out;
}

double wasserstein_ot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0 || a.cols() != b.cols()) throw InputError("wasserstein_ot: bad point sets");
  Eigen::MatrixXd cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) cost(i, j) = (a.row(i) - b.row(j)).norm();
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(a.rows(), 1.0 / a.rows());
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(b.rows(), 1.0 / b.rows());
  return discrete_ot_coupling(p, q, cost).objective;
}

EssResult ess_autocorrelation(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  if (n < 10) throw InputError("ess_autocorrelation needs at least 10 values");
  EssResult out;
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = trace[i] - mean;
  double c0 = 0.0;
  for (double v : c) c0 += v * v;
  if (!(c0 > 0.0) || c0 <= 1e-300 * n) {
    out.ess = 1.0;
    out.degenerate = true;
    out.acf = {1.0};
    return out;
  }
  auto rho = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += c[i] * c[i + k];
    return s / c0;
  };
  out.acf.push_back(1.0);
  // Pair sums Gamma_m = rho(2m) + rho(2m+1), kept while positive and forced
  // nonincreasing.
  double sum_pairs = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double r0 = (m == 0) ? 1.0 : rho(2 * m);
    const double r1 = rho(2 * m + 1);
    double g = r0 + r1;
    if (!(g > 0.0)) break;
    g = std::min(g, prev);
    prev = g;
    if (m > 0) out.acf.push_back(r0);
    out.acf.push_back(r1);
    sum_pairs += g;
  }
  // tau = -1 + 2 sum Gamma_m  equals 1 + 2 sum_{k>=1} rho_k.
  const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / static_cast<double>(n));
  out.ess = std::min(static_cast<double>(n), static_cast<double>(n) / tau);
  return out;
}

Eigen::VectorXd mode_occupancy(const Eigen::MatrixXd& samples, const std::vector<Eigen::VectorXd>& centres) {
  if (centres.empty()) throw InputError("mode_occupancy needs centres");
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(centres.size()));
  if (samples.rows() == 0) return occ;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centres.size(); ++k) {
      const double dist = (samples.row(i).transpose() - centres[k]).squaredNorm();
      if (dist < bd) {
        bd = dist;
        best = k;
      }
    }
    occ[static_cast<Eigen::Index>(best)] += 1.0;
  }
  return occ / static_cast<double>(samples.rows());
}

RmseSummary rmse_summary(const std::vector<double>& estimates, double truth) {
  if (estimates.empty()) throw InputError("rmse_summary needs estimates");
  const double n = static_cast<double>(estimates.size());
  RmseSummary s;
  double mse = 0.0;
  for (double e : estimates) {
    s.mean += e;
    mse += (e - truth) * (e - truth);
  }
  s.mean /= n;
  mse /= n;
  for (double e : estimates) s.sd += (e - s.mean) * (e - s.mean);
  s.sd = estimates.size() > 1 ? std::sqrt(s.sd / (n - 1.0)) : 0.0;
  s.rmse = std::sqrt(mse);
  // SE of mean squared error, then delta method to the root.
  double v = 0.0;
  for (double e : estimates) {
    const double sq = (e - truth) * (e - truth);
    v += (sq - mse) * (sq - mse);
  }
  const double se_mse = estimates.size() > 1 ? std::sqrt(v / (n - 1.0) / n) : 0.0;
  s.se = s.rmse > 0.0 ? se_mse / (2.0 * s.rmse) : 0.0;
  return s;
}

double pps_wall(double rmse, double wall_ms) {
  if (!(rmse > 0.0) || !(wall_ms > 0.0)) throw InputError("pps needs positive rmse and time");
  return 1.0 / (rmse * wall_ms / 1000.0);
}

double pps_evals(double rmse, std::uint64_t target_evals) {
  if (!(rmse > 0.0) || target_evals == 0) throw InputError("pps needs positive rmse and evaluations");
  return 1.0 / (rmse * static_cast<double>(target_evals));
}

}  // namespace warpu
