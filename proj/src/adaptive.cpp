#include "warpu/errors.hpp"
#include "warpu/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace warpu {

InitialDensity InitialDensity::uniform_box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size() || lower.size() == 0) throw InputError("box corners differ in dimension");
  if (((upper - lower).array() <= 0.0).any()) throw InputError("box must have positive width");
  return {Kind::UniformBox, std::move(lower), std::move(upper)};
}

InitialDensity InitialDensity::gaussian(Eigen::VectorXd mean, Eigen::VectorXd sd) {
  if (mean.size() != sd.size() || mean.size() == 0) throw InputError("mean and sd differ in dimension");
  if ((sd.array() <= 0.0).any()) throw InputError("sd must be positive");
  return {Kind::Gaussian, std::move(mean), std::move(sd)};
}

Eigen::VectorXd InitialDensity::sample(CounterRng& rng) const {
  Eigen::VectorXd x(a.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = kind == Kind::UniformBox ? a[i] + (b[i] - a[i]) * (1.0 - rng.uniform()) : a[i] + b[i] * rng.normal();
  return x;
}

double AnnealSchedule::at(int s) const { return std::max(1.0, c0 * std::pow(ratio, static_cast<double>(s))); }

namespace {

Eigen::MatrixXd subsample(const Eigen::MatrixXd& X, int m, CounterRng& rng) {
  const Eigen::Index n = X.rows();
  if (m >= n) return X;
  // Partial Fisher-Yates on an index vector.
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  Eigen::MatrixXd out(m, X.cols());
  for (int i = 0; i < m; ++i) out.row(i) = X.row(idx[i]);
  return out;
}

}  // namespace

AdaptiveResult run_adaptive_warpu(const TargetDensity& target, const AdaptiveConfig& c) {
  if (c.T < 1 || c.M < 0 || c.K < 1) throw InputError("adaptive sampler needs T >= 1, M >= 0, K >= 1");
  if (c.init.dim() != target.dim()) throw InputError("initial density has wrong dimension");
  CounterRng rng(c.seed);
  CounterRng fit_rng = rng.split(1);
  AdaptiveResult res;

  // Stage 0: draws from the initial density and the first fit.
  res.initial.resize(c.T, target.dim());
  for (int i = 0; i < c.T; ++i) res.initial.row(i) = c.init.sample(rng).transpose();
  EmOptions em;
  em.max_iter = c.em_max_iter;
  em.rel_tol = c.em_rel_tol;
  em.seed = fit_rng();
  res.mixtures.push_back(em_fit(res.initial, c.K, c.constraints, em).mixture);

  Eigen::MatrixXd pool = res.initial;
  const std::uint64_t before = target.eval_count();
  const Eigen::VectorXd theta0 = c.theta0 ? *c.theta0 : Eigen::VectorXd(res.initial.row(c.T - 1).transpose());
  ChainState state = make_chain(target, theta0, rng.split(2));
  res.init_evals = target.eval_count() - before;
  const LocalKernel kernel = c.kernel ? c.kernel : random_walk_kernel(c.sigma);
  const auto schedule = c.schedule ? c.schedule : update_schedule;

  for (int s = 1; s <= c.M; ++s) {
    state.stage = s;
    const double anneal = c.anneal ? c.anneal->at(s) : 1.0;
    res.stages.push_back(run_warpu(state, target, res.mixtures.back(), kernel, {c.T, anneal, c.keep_cache}));
    const auto& fresh = res.stages.back().samples;
    Eigen::MatrixXd grown(pool.rows() + fresh.rows(), pool.cols());
    grown << pool, fresh;
    pool.swap(grown);

    const bool early = c.policy == RefitPolicy::AllSamplesEarlyStop || c.policy == RefitPolicy::SubsampleEarlyStop;
    bool refit = fit_rng.uniform() <= schedule(s);
    if (early && s > c.early_stop_stage) refit = false;
    res.refit.push_back(refit);
    if (!refit) {
      res.mixtures.push_back(res.mixtures.back());
      continue;
    }
    const bool sub = c.policy == RefitPolicy::Subsample || c.policy == RefitPolicy::SubsampleEarlyStop;
    const Eigen::MatrixXd data = sub ? subsample(pool, c.T, fit_rng) : pool;
    EmOptions o = em;
    o.seed = fit_rng();
    if (c.warm_refit) o.warm_start = res.mixtures.back();
    res.mixtures.push_back(em_fit(data, c.K, c.constraints, o).mixture);
  }
  res.final_state = state;
  return res;
}

}  // namespace warpu
