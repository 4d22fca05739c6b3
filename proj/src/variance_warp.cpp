#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"
#include "warpu/samplers.hpp"

#include <cmath>

namespace warpu {

namespace {

double log_inv_gamma(double s2, double a, double b) { return -(a + 1.0) * std::log(s2) - b / s2; }

GaussianMixture unit_scale_mixture(const VarianceAugmentedMixture& m) {
  return GaussianMixture::isotropic(m.weights, m.means, std::vector<double>(m.weights.size(), 1.0));
}

}  // namespace

std::vector<std::vector<int>> VarianceAugmentedMixture::group_list() const {
  if (!groups.empty()) return groups;
  std::vector<int> all(dim());
  for (int i = 0; i < dim(); ++i) all[i] = i;
  return {all};
}

double VarianceAugmentedMixture::log_component(int k, const Eigen::VectorXd& theta) const {
  if (weights[k] <= 0.0) return kNegInf;
  double out = std::log(weights[k]);
  if (point_mass) return out + log_std_normal(theta - means[k]);
  for (const auto& g : group_list()) {
    const double dg = static_cast<double>(g.size());
    double r2 = 0.0;
    for (int i : g) r2 += (theta[i] - means[k][i]) * (theta[i] - means[k][i]);
    // Normal scale mixture with inverse-gamma variance, integrated out.
    out += -0.5 * dg * kLog2Pi + a * std::log(b) - std::lgamma(a) + std::lgamma(a + 0.5 * dg) -
           (a + 0.5 * dg) * std::log(b + 0.5 * r2);
  }
  return out;
}

double VarianceAugmentedMixture::log_density(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd lc(size());
  for (int k = 0; k < size(); ++k) lc[k] = log_component(k, theta);
  return log_sum_exp(lc);
}

VarianceAugmentedStep variance_augmented_step(ChainState& s, const TargetDensity& target,
                                              const VarianceAugmentedMixture& m, double sigma, int inner_steps) {
  if (m.dim() != target.dim()) throw InputError("mixture and target dimensions differ");
  if (!(m.a > 0.0 && m.b > 0.0)) throw InputError("inverse-gamma parameters must be positive");
  VarianceAugmentedStep out;
  const std::uint64_t before = target.eval_count();
  const auto groups = m.group_list();
  const int G = static_cast<int>(groups.size());

  if (m.point_mass) {
    const WarpStep w = warpu_step(s, target, unit_scale_mixture(m), random_walk_kernel(sigma));
    out.accepted = w.accepted;
    out.psi = w.psi;
    out.psi_prime = w.psi_prime;
    out.sigma2 = Eigen::VectorXd::Ones(G);
    out.evals = w.evals;
    return out;
  }
  if (inner_steps < 1) throw InputError("need at least one inner Metropolis step");

  out.accepted = rwm_step(s, target, sigma);
  Eigen::VectorXd lc(m.size());
  for (int k = 0; k < m.size(); ++k) lc[k] = m.log_component(k, s.theta);
  SimplexVector varpi;
  normalize_log_weights(lc, varpi);
  int psi = draw_index(varpi, s.rng.uniform());
  out.psi = psi;

  // Conjugate draw of the variances given theta and psi.
  Eigen::VectorXd s2(G);
  for (int g = 0; g < G; ++g) {
    double r2 = 0.0;
    for (int i : groups[g]) r2 += (s.theta[i] - m.means[psi][i]) * (s.theta[i] - m.means[psi][i]);
    const double shape = m.a + 0.5 * static_cast<double>(groups[g].size());
    s2[g] = (m.b + 0.5 * r2) / s.rng.gamma(shape);
  }
  Eigen::VectorXd theta_star(s.theta.size());
  for (int g = 0; g < G; ++g)
    for (int i : groups[g]) theta_star[i] = (s.theta[i] - m.means[psi][i]) / std::sqrt(s2[g]);

  auto back = [&](int k, const Eigen::VectorXd& v) {
    Eigen::VectorXd x(theta_star.size());
    for (int g = 0; g < G; ++g)
      for (int i : groups[g]) x[i] = m.means[k][i] + std::sqrt(v[g]) * theta_star[i];
    return x;
  };

  // Inner Metropolis on (psi', sigma'^2) targeting nu(.|theta*), started
  // from the current index, which is already a draw from nu.
  Eigen::VectorXd x = s.theta;
  double lq = s.log_q;
  double lg = lq - m.log_density(x);
  const Eigen::Map<const Eigen::VectorXd> w(m.weights.data(), m.size());
  for (int j = 0; j < inner_steps; ++j) {
    int k_new = psi;
    Eigen::VectorXd s2_new = s2;
    double log_extra = 0.0;
    if (j % 2 == 0) {
      // Independence proposal from the prior: ratio reduces to g'/g.
      k_new = draw_index(w, s.rng.uniform());
      for (int g = 0; g < G; ++g) s2_new[g] = m.b / s.rng.gamma(m.a);
    } else {
      for (int g = 0; g < G; ++g) {
        s2_new[g] = s2[g] * std::exp(0.5 * s.rng.normal());
        log_extra += log_inv_gamma(s2_new[g], m.a, m.b) + std::log(s2_new[g]) - log_inv_gamma(s2[g], m.a, m.b) -
                     std::log(s2[g]);
      }
    }
    const Eigen::VectorXd x_new = back(k_new, s2_new);
    const double lq_new = target.log_q(x_new);
    const double lg_new = lq_new == kNegInf ? kNegInf : lq_new - m.log_density(x_new);
    if (std::log(s.rng.uniform()) < lg_new - lg + log_extra) {
      psi = k_new;
      s2 = s2_new;
      x = x_new;
      lq = lq_new;
      lg = lg_new;
    }
  }
  s.theta = x;
  s.log_q = lq;
  ++s.steps;
  if (out.accepted) ++s.accepted;
  if (psi != out.psi) ++s.mode_jumps;
  out.psi_prime = psi;
  out.sigma2 = s2;
  out.evals = target.eval_count() - before;
  return out;
}

SamplerTrace run_variance_augmented_warpu(const TargetDensity& target, const VarianceAugmentedConfig& c) {
  ChainState s = make_chain(target, c.theta0, CounterRng(c.seed));
  const int G = static_cast<int>(c.mix.group_list().size());
  SamplerTrace tr;
  tr.resize(c.T, target.dim(), 0, false, G);
  for (int t = 0; t < c.T; ++t) {
    const VarianceAugmentedStep st = variance_augmented_step(s, target, c.mix, c.sigma, c.inner_steps);
    tr.record(t, s, st.accepted, st.psi, st.psi_prime, st.evals);
    tr.aux.row(t) = st.sigma2.transpose();
  }
  return tr;
}

}  // namespace warpu
