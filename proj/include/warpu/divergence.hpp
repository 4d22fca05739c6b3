#pragma once

#include <Eigen/Dense>

#include <functional>

namespace warpu {

using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;

struct DivergenceEstimate {
  double value = 0.0;
  double se = 0.0;  // zero for quadrature
  bool divergent = false;  // tail check failed, value is not trustworthy
  bool low_confidence = false;  // MC standard error above 10% of the value
};

// Axis-aligned integration box, 1 or 2 dimensions.
struct QuadratureBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// Integral of f over the box by adaptive Gauss-Kronrod.
double integrate_box(const std::function<double(const Eigen::VectorXd&)>& f, const QuadratureBox& box,
                     double tol = 1e-10);

// chi2_P(p1, p2) = int (p2/p1 - 1)^2 p1. Both densities normalised.
// The box result is compared with a box widened by half its width on each
// side; a relative change above 1e-6 marks the integral as divergent.
DivergenceEstimate pearson_chi2(const LogDensityFn& log_p1, const LogDensityFn& log_p2, const QuadratureBox& box);

// Self-normalised Monte Carlo version from draws of p1 (rows).
DivergenceEstimate pearson_chi2_mc(const LogDensityFn& log_p1, const LogDensityFn& log_p2,
                                   const Eigen::MatrixXd& draws_p1);

// H_A = 1 - int [eta1/p1 + eta2/p2]^{-1} with eta_i proportional to 1/s_i and
// eta1 + eta2 = 1. Identical densities give 0, disjoint supports give 1.
DivergenceEstimate harmonic_divergence(const LogDensityFn& log_p1, const LogDensityFn& log_p2, double s1,
                                       const QuadratureBox& box);

// Monte Carlo version from draws of both densities, using their pooled
// mixture as the importance density.
DivergenceEstimate harmonic_divergence_mc(const LogDensityFn& log_p1, const LogDensityFn& log_p2, double s1,
                                          const Eigen::MatrixXd& draws_p1, const Eigen::MatrixXd& draws_p2);

}  // namespace warpu
