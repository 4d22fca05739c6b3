#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"
#include "warpu/samplers.hpp"

#include <cmath>

namespace warpu {

std::vector<double> equally_spaced_ladder(int levels) {
  if (levels < 1) throw InputError("ladder needs at least one level");
  std::vector<double> b(levels);
  for (int i = 0; i < levels; ++i) b[i] = static_cast<double>(levels - i) / levels;
  return b;
}

TemperingResult run_parallel_tempering(const TargetDensity& target, const TemperingConfig& c) {
  std::vector<double> betas = c.betas.empty() ? equally_spaced_ladder(c.levels) : c.betas;
  const int L = static_cast<int>(betas.size());
  if (L < 1) throw InputError("empty temperature ladder");
  if (betas[0] != 1.0) throw InputError("first level must have inverse temperature 1");
  for (int i = 0; i < L; ++i)
    if (!(betas[i] > 0.0 && betas[i] <= 1.0)) throw InputError("inverse temperatures must lie in (0, 1]");
  if (c.theta0.size() != target.dim()) throw InputError("initial state has wrong dimension");
  if (c.T < 0 || c.burn_in < 0) throw InputError("iteration counts must be nonnegative");

  CounterRng rng(c.seed);
  std::vector<Eigen::VectorXd> x(L, c.theta0);
  std::vector<double> lq(L, target.log_q(c.theta0));
  // Log spacings rho_i with beta_{i+1} = beta_i * exp(-exp(rho_i)).
  std::vector<double> rho(std::max(0, L - 1));
  for (int i = 0; i + 1 < L; ++i) rho[i] = std::log(std::log(betas[i] / betas[i + 1]));

  TemperingResult res;
  res.cold.resize(c.T, target.dim(), 0, false);
  res.swap_rates = Eigen::VectorXd::Zero(std::max(0, L - 1));
  Eigen::VectorXd swap_tries = Eigen::VectorXd::Zero(std::max(0, L - 1));
  bool cold_accepted = false;

  for (int it = 0; it < c.burn_in + c.T; ++it) {
    const std::uint64_t before = target.eval_count();
    const bool adapting = c.adaptive_ladder && it < c.burn_in;
    for (int l = 0; l < L; ++l) {
      const double s = c.sigma / std::sqrt(betas[l]);
      Eigen::VectorXd prop(x[l].size());
      for (Eigen::Index j = 0; j < prop.size(); ++j) prop[j] = x[l][j] + s * rng.normal();
      const double lp = target.log_q(prop);
      const bool acc = std::log(rng.uniform()) < betas[l] * (lp - lq[l]);
      if (acc) {
        x[l] = std::move(prop);
        lq[l] = lp;
      }
      if (l == 0) cold_accepted = acc;
    }
    // Alternate even and odd adjacent pairs.
    for (int i = it % 2; i + 1 < L; i += 2) {
      const double log_a = (betas[i] - betas[i + 1]) * (lq[i + 1] - lq[i]);
      const double a = std::isnan(log_a) ? 0.0 : std::min(1.0, std::exp(log_a));
      if (rng.uniform() <= a) {
        std::swap(x[i], x[i + 1]);
        std::swap(lq[i], lq[i + 1]);
      }
      if (it >= c.burn_in) {
        res.swap_rates[i] += a;
        swap_tries[i] += 1.0;
      }
      if (adapting) {
        const double gain = std::pow(1.0 + it, -0.6);
        rho[i] += gain * (a - c.target_swap_rate);
      }
    }
    if (adapting) {
      for (int i = 0; i + 1 < L; ++i) betas[i + 1] = betas[i] * std::exp(-std::exp(rho[i]));
    }
    if (it >= c.burn_in) {
      ChainState view;
      view.theta = x[0];
      view.log_q = lq[0];
      res.cold.record(it - c.burn_in, view, cold_accepted, -1, -1, target.eval_count() - before);
    }
  }
  for (int i = 0; i + 1 < L; ++i)
    if (swap_tries[i] > 0) res.swap_rates[i] /= swap_tries[i];
  res.betas = betas;
  return res;
}

}  // namespace warpu
