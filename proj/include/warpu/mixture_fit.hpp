#pragma once

#include "warpu/mixture.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace warpu {

// Bounds that keep the adaptive sampler well behaved: K < k_max, component
// determinants within [det_min, det_max], means inside a ball of radius
// mean_bound.
struct FitConstraints {
  int k_max = 1000;
  double det_min = 1e-300;
  double det_max = 1e300;
  double mean_bound = 1e300;
  void validate() const;
};

struct EmOptions {
  int max_iter = 500;
  double rel_tol = 1e-8;
  double ridge = 1e-6;  // times the per-coordinate sample variance
  std::uint64_t seed = 0;
  std::optional<GaussianMixture> warm_start;
};

struct EmResult {
  GaussianMixture mixture;
  std::vector<double> log_likelihood;  // per iteration, before each M-step
  Eigen::MatrixXd responsibilities;  // n x K, from the final parameters
  int iterations = 0;
  bool converged = false;
  int reseeded = 0;  // collapsed components restarted
};

// samples is n x d, one draw per row.
EmResult em_fit(const Eigen::MatrixXd& samples, int K, const FitConstraints& constraints, const EmOptions& options);

// Project onto the constraint set: scale factors whose determinant is out of
// range, pull means back radially, renormalise weights. Idempotent.
GaussianMixture enforce_constraints(const GaussianMixture& mix, const FitConstraints& constraints);

// Refit probability at stage s: exp(1 - s^{1/8}).
double update_schedule(int s);

struct BicEntry {
  int K = 0;
  double log_likelihood = 0.0;
  double bic = 0.0;
};

std::vector<BicEntry> bic_sweep(const Eigen::MatrixXd& samples, const std::vector<int>& Ks,
                                const FitConstraints& constraints, const EmOptions& options);

double mixture_log_likelihood(const GaussianMixture& mix, const Eigen::MatrixXd& samples);

}  // namespace warpu
