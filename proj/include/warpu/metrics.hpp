#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace warpu {

// Exact W1 between two empirical measures on the line, integrating the gap
// between their quantile functions over the merged breakpoints.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

// Per-column W1 between two sample matrices with matching width.
Eigen::VectorXd marginal_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Exact W1 (Euclidean ground cost) between two point clouds given as rows,
// solved as a uniform-weight transportation problem. Intended for small
// subsamples, a few hundred points each.
double wasserstein_ot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct EssResult {
  double ess = 0.0;
  std::vector<double> acf;  // lags 0.. up to the truncation point
  bool degenerate = false;  // constant trace, ESS set to 1
};

// Initial monotone positive sequence estimator.
EssResult ess_autocorrelation(const std::vector<double>& trace);

// Fraction of rows closest (Euclidean) to each centre.
Eigen::VectorXd mode_occupancy(const Eigen::MatrixXd& samples, const std::vector<Eigen::VectorXd>& centres);

struct RmseSummary {
  double rmse = 0.0;
  double se = 0.0;  // delta-method SE of the RMSE across replicates
  double mean = 0.0;
  double sd = 0.0;
};
RmseSummary rmse_summary(const std::vector<double>& estimates, double truth);

// 1 / (RMSE * seconds) and 1 / (RMSE * evaluations).
double pps_wall(double rmse, double wall_ms);
double pps_evals(double rmse, std::uint64_t target_evals);

}  // namespace warpu
