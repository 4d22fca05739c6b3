#pragma once

#include "warpu/mixture.hpp"
#include "warpu/target.hpp"

#include <Eigen/Dense>

#include <vector>

namespace warpu {

// nu(.|theta*) together with the K back-mapped states and their log q values,
// which the sampler keeps so the next state costs nothing extra.
struct InverseIndexDistribution {
  SimplexVector probs;
  Eigen::VectorXd log_terms;  // unnormalised log nu
  std::vector<Eigen::VectorXd> back_mapped;  // H_k(theta*)
  Eigen::VectorXd log_q;  // log q(H_k(theta*))
};

// Uses exactly K target evaluations. Throws DegenerateStateError when every
// term is -inf.
InverseIndexDistribution inverse_index_distribution(const GaussianMixture& mix, const TargetDensity& target,
                                                    const Eigen::VectorXd& theta_star);

// Same distribution from already known log q(H_k(theta*)); no evaluations.
InverseIndexDistribution inverse_index_distribution_cached(const GaussianMixture& mix,
                                                           const Eigen::VectorXd& theta_star,
                                                           const Eigen::VectorXd& log_q_back);

// nu^{1/C}, renormalised. C = 1 returns the input untouched.
SimplexVector annealed_inverse_index(const SimplexVector& nu, double C);

// log of q_tilde_k(theta*) = phi(theta*) q(H_k theta*) / phi_mix(H_k theta*).
double component_log_ratio(const GaussianMixture& mix, const Eigen::VectorXd& theta_star, int k, double log_q_at_back);
double component_warped_log_density(const GaussianMixture& mix, const TargetDensity& target,
                                    const Eigen::VectorXd& theta_star, int k);

// log q_tilde(theta*) = log sum_k w_k q_tilde_k(theta*). K evaluations.
double warped_log_density(const GaussianMixture& mix, const TargetDensity& target, const Eigen::VectorXd& theta_star);
double warped_log_density_cached(const GaussianMixture& mix, const Eigen::VectorXd& theta_star,
                                 const Eigen::VectorXd& log_q_back);

// Entry (psi', psi) is the mass that ends at theta after entering through
// component psi and leaving through psi'. All entries sum to q(theta).
Eigen::MatrixXd mass_transport_decomposition(const GaussianMixture& mix, const TargetDensity& target,
                                             const Eigen::VectorXd& theta);

// f^{(psi)} = sum over psi' of the decomposition, i.e. the column sums.
Eigen::VectorXd transported_component_densities(const Eigen::MatrixXd& decomposition);

}  // namespace warpu
