#pragma once

#include "warpu/mixture.hpp"
#include "warpu/rng.hpp"
#include "warpu/target.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace warpu {

struct TargetInfo {
  std::string name;
  TargetDensity target;
  double log_c = 0.0;  // log of int q
  std::vector<Eigen::VectorXd> centres;  // mode centres, for occupancy
  std::function<Eigen::VectorXd(CounterRng&)> sampler;  // exact draws from pi, when available
  std::optional<GaussianMixture> mixture;  // pi itself, when pi is a Gaussian mixture
};

// q = exp(log_c) * phi_mix, with analytic gradient.
TargetInfo gaussian_mixture_target(const std::string& name, const GaussianMixture& mix, double log_c);

// Five-mode 4-d mixture, weights k/15, written without the 2 pi factor so
// c = (2 pi)^{d/2}. Passing c rescales to a normalised mixture times c.
TargetInfo five_mode_target(int dim = 4, std::optional<double> c = std::nullopt);

// Two spherical modes at -1 (variance s1sq) and +1 (variance s2sq), as
// written with the 2 pi factor missing: c = (2 pi)^{d/2}.
TargetInfo unequal_variance_target(int dim, double s1sq = 0.8, double s2sq = 0.2);

// Two modes with five coordinate blocks of distinct variances and means
// drawn uniformly from (-2.5, -1.5) and (1.5, 2.5). dim must be a multiple of 5.
TargetInfo block_variance_target(int dim, std::uint64_t seed);

struct SkewTComponent {
  Eigen::VectorXd xi;  // location
  Eigen::MatrixXd omega;  // scale matrix
  Eigen::VectorXd alpha;  // skewness
  double df = 12.0;
};

double skew_t_log_density(const SkewTComponent& c, const Eigen::VectorXd& x);
Eigen::VectorXd skew_t_sample(const SkewTComponent& c, CounterRng& rng);

// Mixture of multivariate skew-t components scaled to total mass c.
TargetInfo skew_t_mixture_target(std::vector<double> weights, std::vector<SkewTComponent> comps, double c = 1.0);
// Random components under a seed, for the desk-scale benchmark.
TargetInfo random_skew_t_mixture(int dim, int K, double df, double max_skew, std::uint64_t seed, double c = 1.0);

// One-dimensional three-mode Gaussian mixture, c = 1.
TargetInfo three_mode_1d_target();

// One-dimensional mixture of Student-t components, c = 1.
TargetInfo t_mixture_1d_target(std::vector<double> weights, std::vector<double> locs, std::vector<double> scales,
                               double df);

// Two-mode 2-d and three-mode 5-d Gaussian mixtures used for couplings, c = 1.
TargetInfo bimodal_2d_target();
TargetInfo trimodal_5d_target();

// Build any of the above from a JSON spec {"name": ..., params...}.
// Unknown names or keys raise ConfigError.
TargetInfo make_target(const nlohmann::json& spec);

// E[sum theta_i] and E[sum theta_i^2] under a Gaussian mixture.
std::pair<double, double> mixture_sum_moments(const GaussianMixture& mix);

}  // namespace warpu
