#include "warpu/warp.hpp"

#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"

#include <cmath>

namespace warpu {

InverseIndexDistribution inverse_index_distribution_cached(const GaussianMixture& mix,
                                                           const Eigen::VectorXd& theta_star,
                                                           const Eigen::VectorXd& log_q_back) {
  const int K = mix.size();
  if (log_q_back.size() != K) throw InputError("cached log q has wrong length");
  InverseIndexDistribution out;
  out.back_mapped.reserve(K);
  out.log_q = log_q_back;
  out.log_terms.resize(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd x = mix.inverse_warp(theta_star, k);
    if (log_q_back[k] == kNegInf || mix.weight(k) == 0.0) {
      out.log_terms[k] = kNegInf;
    } else {
      const double log_resp = mix.log_component(k, x) - mix.log_density(x);
      out.log_terms[k] = log_resp + log_q_back[k] + mix.log_det(k);
    }
    out.back_mapped.push_back(std::move(x));
  }
  const double lse = normalize_log_weights(out.log_terms, out.probs);
  if (lse == kNegInf || std::isnan(lse)) throw DegenerateStateError("inverse index distribution is degenerate");
  return out;
}

InverseIndexDistribution inverse_index_distribution(const GaussianMixture& mix, const TargetDensity& target,
                                                    const Eigen::VectorXd& theta_star) {
  const int K = mix.size();
  Eigen::VectorXd lq(K);
  for (int k = 0; k < K; ++k) lq[k] = target.log_q(mix.inverse_warp(theta_star, k));
  return inverse_index_distribution_cached(mix, theta_star, lq);
}

SimplexVector annealed_inverse_index(const SimplexVector& nu, double C) {
  if (!(C >= 1.0)) throw InputError("annealing constant must be >= 1");
  if (C == 1.0) return nu;
  Eigen::VectorXd logw(nu.size());
  for (Eigen::Index k = 0; k < nu.size(); ++k) logw[k] = nu[k] > 0.0 ? std::log(nu[k]) / C : kNegInf;
  SimplexVector out;
  normalize_log_weights(logw, out);
  return out;
}

double component_log_ratio(const GaussianMixture& mix, const Eigen::VectorXd& theta_star, int k, double log_q_at_back) {
  if (log_q_at_back == kNegInf) return kNegInf;
  const Eigen::VectorXd x = mix.inverse_warp(theta_star, k);
  return log_std_normal(theta_star) + log_q_at_back - mix.log_density(x);
}

double component_warped_log_density(const GaussianMixture& mix, const TargetDensity& target,
                                    const Eigen::VectorXd& theta_star, int k) {
  return component_log_ratio(mix, theta_star, k, target.log_q(mix.inverse_warp(theta_star, k)));
}

double warped_log_density_cached(const GaussianMixture& mix, const Eigen::VectorXd& theta_star,
                                 const Eigen::VectorXd& log_q_back) {
  const int K = mix.size();
  Eigen::VectorXd terms(K);
  for (int k = 0; k < K; ++k)
    terms[k] = mix.weight(k) > 0.0 ? std::log(mix.weight(k)) + component_log_ratio(mix, theta_star, k, log_q_back[k])
                                   : kNegInf;
  return log_sum_exp(terms);
}

double warped_log_density(const GaussianMixture& mix, const TargetDensity& target, const Eigen::VectorXd& theta_star) {
  const int K = mix.size();
  Eigen::VectorXd lq(K);
  for (int k = 0; k < K; ++k) lq[k] = target.log_q(mix.inverse_warp(theta_star, k));
  return warped_log_density_cached(mix, theta_star, lq);
}

Eigen::MatrixXd mass_transport_decomposition(const GaussianMixture& mix, const TargetDensity& target,
                                             const Eigen::VectorXd& theta) {
  const int K = mix.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(K, K);
  for (int pp = 0; pp < K; ++pp) {
    // theta* = F_{psi'}(theta); nu(psi'|theta*) is shared by the whole row.
    const Eigen::VectorXd theta_star = mix.forward_warp(theta, pp);
    InverseIndexDistribution nu;
    try {
      nu = inverse_index_distribution(mix, target, theta_star);
    } catch (const DegenerateStateError&) {
      continue;
    }
    if (nu.probs[pp] == 0.0) continue;
    for (int p = 0; p < K; ++p) {
      // xi = G^{-1}(theta) = H_psi(F_psi'(theta)) is exactly back_mapped[p].
      const double lq = nu.log_q[p];
      if (lq == kNegInf) continue;
      const Eigen::VectorXd& xi = nu.back_mapped[p];
      const double log_resp = mix.log_component(p, xi) - mix.log_density(xi);
      const double log_jac = mix.log_det(p) - mix.log_det(pp);
      out(pp, p) = std::exp(lq + log_jac + log_resp + std::log(nu.probs[pp]));
    }
  }
  return out;
}

Eigen::VectorXd transported_component_densities(const Eigen::MatrixXd& decomposition) {
  return decomposition.colwise().sum().transpose();
}

}  // namespace warpu
