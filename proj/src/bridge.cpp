#include "warpu/errors.hpp"
#include "warpu/estimators.hpp"
#include "warpu/numeric.hpp"
#include "warpu/warp.hpp"

#include <cmath>
#include <map>

namespace warpu {

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

BridgeResult iterative_bridge(const Eigen::VectorXd& l1_on_1, const Eigen::VectorXd& l2_on_1,
                              const Eigen::VectorXd& l1_on_2, const Eigen::VectorXd& l2_on_2, double tol,
                              int max_iter) {
  const Eigen::Index n1 = l1_on_1.size(), n2 = l1_on_2.size();
  if (n1 == 0 || n2 == 0) throw InputError("bridge: both sample sets must be nonempty");
  if (l2_on_1.size() != n1 || l2_on_2.size() != n2) throw InputError("bridge: mismatched value tables");
  for (const auto* v : {&l1_on_1, &l2_on_1, &l1_on_2, &l2_on_2})
    for (Eigen::Index i = 0; i < v->size(); ++i)
      if (std::isnan((*v)[i]) || (*v)[i] == std::numeric_limits<double>::infinity())
        throw NumericError("bridge: log density values must be finite or -inf");

  const double ls1 = std::log(static_cast<double>(n1) / static_cast<double>(n1 + n2));
  const double ls2 = std::log(static_cast<double>(n2) / static_cast<double>(n1 + n2));

  double sum = 0.0;
  std::size_t cnt = 0;
  auto add = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (a[i] != kNegInf && b[i] != kNegInf) {
        sum += a[i] - b[i];
        ++cnt;
      }
  };
  add(l1_on_1, l2_on_1);
  add(l1_on_2, l2_on_2);
  if (cnt == 0) throw OverlapError("bridge: no draw has positive density under both q1 and q2");
  double lr = sum / static_cast<double>(cnt);

  Eigen::VectorXd t1(n1), t2(n2);
  auto evaluate = [&](double lr_now, double& log_num, double& log_den) {
    for (Eigen::Index j = 0; j < n2; ++j)
      t2[j] = l1_on_2[j] == kNegInf ? kNegInf
                                    : l1_on_2[j] - log_sum_exp(ls1 + l1_on_2[j], ls2 + lr_now + l2_on_2[j]);
    for (Eigen::Index j = 0; j < n1; ++j)
      t1[j] = l2_on_1[j] == kNegInf ? kNegInf
                                    : l2_on_1[j] - log_sum_exp(ls1 + l1_on_1[j], ls2 + lr_now + l2_on_1[j]);
    log_num = log_sum_exp(t2) - std::log(static_cast<double>(n2));
    log_den = log_sum_exp(t1) - std::log(static_cast<double>(n1));
    if (log_num == kNegInf || log_den == kNegInf)
      throw OverlapError("bridge: every bridge term is degenerate");
  };

  BridgeResult res;
  double log_num = 0.0, log_den = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    evaluate(lr, log_num, log_den);
    const double next = log_num - log_den;
    if (!std::isfinite(next)) throw NumericError("bridge: iterate is not finite");
    const double step = std::abs(next - lr);
    lr = next;
    res.iterations = it;
    if (step < tol) {
      res.log_r = lr;
      res.r = std::exp(lr);
      Eigen::VectorXd f2 = (t2.array() - log_num).exp();
      Eigen::VectorXd f1 = (t1.array() - log_den).exp();
      res.se_log = std::sqrt(sample_variance(f2) / static_cast<double>(n2) + sample_variance(f1) / static_cast<double>(n1));
      return res;
    }
  }
  throw ConvergenceError("bridge: no convergence within " + std::to_string(max_iter) + " iterations", std::exp(lr));
}

nlohmann::json to_json(const EstimatorReport& r) {
  nlohmann::json pc = nlohmann::json::array();
  for (const auto& c : r.per_component)
    pc.push_back({{"components", c.components},
                  {"weight", c.weight},
                  {"c_hat", c.c_hat},
                  {"n1", c.n1},
                  {"n2", c.n2},
                  {"iterations", c.iterations}});
  return {{"method", r.method},           {"c_hat", r.c_hat},       {"lambda_hat", r.lambda_hat},
          {"iterations", r.iterations},   {"per_component", pc},    {"target_evals", r.target_evals},
          {"se_hat", r.se_hat}};
}

Eigen::MatrixXd standard_normal_draws(int n, int d, CounterRng& rng) {
  Eigen::MatrixXd z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
  return z;
}

namespace {

EstimatorReport finish(std::string method, const BridgeResult& b, std::uint64_t evals) {
  EstimatorReport r;
  r.method = std::move(method);
  r.c_hat = b.r;
  r.lambda_hat = b.log_r;
  r.iterations = b.iterations;
  r.target_evals = evals;
  r.se_hat = b.r * b.se_log;
  return r;
}

void check_inputs(const TargetDensity& target, const GaussianMixture& mix, const Eigen::MatrixXd& a) {
  if (mix.dim() != target.dim()) throw InputError("mixture and target dimensions differ");
  if (a.cols() != target.dim()) throw InputError("samples have wrong dimension");
}

}  // namespace

EstimatorReport classical_bridge_estimate(const TargetDensity& target, const GaussianMixture& mix,
                                          const Eigen::MatrixXd& pi_samples, const Eigen::MatrixXd& mix_samples) {
  check_inputs(target, mix, pi_samples);
  check_inputs(target, mix, mix_samples);
  const std::uint64_t before = target.eval_count();
  const Eigen::Index n1 = pi_samples.rows(), n2 = mix_samples.rows();
  Eigen::VectorXd a1(n1), b1(n1), a2(n2), b2(n2);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const Eigen::VectorXd x = pi_samples.row(i).transpose();
    a1[i] = target.log_q(x);
    b1[i] = mix.log_density(x);
  }
  for (Eigen::Index i = 0; i < n2; ++i) {
    const Eigen::VectorXd x = mix_samples.row(i).transpose();
    a2[i] = target.log_q(x);
    b2[i] = mix.log_density(x);
  }
  return finish("bs", iterative_bridge(a1, b1, a2, b2), target.eval_count() - before);
}

namespace {

EstimatorReport warpu_bridge_core(const TargetDensity& target, const GaussianMixture& mix,
                                  const Eigen::VectorXd& lqt_on_1, const Eigen::VectorXd& lphi_on_1,
                                  const Eigen::MatrixXd& phi_samples, std::uint64_t before) {
  const Eigen::Index n2 = phi_samples.rows();
  Eigen::VectorXd a2(n2), b2(n2);
  for (Eigen::Index i = 0; i < n2; ++i) {
    const Eigen::VectorXd z = phi_samples.row(i).transpose();
    a2[i] = warped_log_density(mix, target, z);
    b2[i] = log_std_normal(z);
  }
  return finish("wb", iterative_bridge(lqt_on_1, lphi_on_1, a2, b2), target.eval_count() - before);
}

}  // namespace

EstimatorReport warpu_bridge_estimate(const TargetDensity& target, const GaussianMixture& mix,
                                      const Eigen::MatrixXd& pi_samples, const Eigen::MatrixXd& phi_samples,
                                      CounterRng& rng) {
  check_inputs(target, mix, pi_samples);
  check_inputs(target, mix, phi_samples);
  if (pi_samples.rows() == 0 || phi_samples.rows() == 0) throw InputError("bridge: both sample sets must be nonempty");
  const std::uint64_t before = target.eval_count();
  const Eigen::Index n1 = pi_samples.rows();
  Eigen::VectorXd a1(n1), b1(n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const Eigen::VectorXd x = pi_samples.row(i).transpose();
    const int psi = draw_index(mix.responsibilities(x), rng.uniform());
    const Eigen::VectorXd z = mix.forward_warp(x, psi);
    a1[i] = warped_log_density(mix, target, z);
    b1[i] = log_std_normal(z);
  }
  return warpu_bridge_core(target, mix, a1, b1, phi_samples, before);
}

EstimatorReport warpu_bridge_from_trace(const TargetDensity& target, const GaussianMixture& mix,
                                        const SamplerTrace& trace, const Eigen::MatrixXd& phi_samples) {
  if (!trace.has_cache()) throw InputError("trace carries no warp cache");
  if (trace.log_q_back.cols() != mix.size()) throw InputError("trace cache was built with a different K");
  check_inputs(target, mix, phi_samples);
  const std::uint64_t before = target.eval_count();
  const int n1 = trace.size();
  Eigen::VectorXd a1(n1), b1(n1);
  for (int i = 0; i < n1; ++i) {
    const Eigen::VectorXd z = trace.theta_star.row(i).transpose();
    a1[i] = warped_log_density_cached(mix, z, trace.log_q_back.row(i).transpose());
    b1[i] = log_std_normal(z);
  }
  return warpu_bridge_core(target, mix, a1, b1, phi_samples, before);
}

namespace {

// Shared SWB tail. psi, z and log q(H_psi z) for each pi-side draw.
EstimatorReport swb_core(const TargetDensity& target, const GaussianMixture& mix, const std::vector<int>& psi,
                         const Eigen::MatrixXd& zs, const Eigen::VectorXd& lq, const SwbOptions& o, CounterRng& rng,
                         std::uint64_t before) {
  const int K = mix.size();
  const int d = mix.dim();
  if (o.n2_per_component < 1) throw InputError("SWB: n2 per component must be positive");
  if (o.min_component_count < 1) throw InputError("SWB: minimum component count must be positive");
  std::vector<int> counts(K, 0);
  for (int p : psi) ++counts[p];

  // Strata: each component alone, or merged into its nearest neighbour.
  std::vector<int> group(K);
  for (int k = 0; k < K; ++k) group[k] = k;
  for (int k = 0; k < K; ++k) {
    if (mix.weight(k) == 0.0 || counts[k] >= o.min_component_count) continue;
    if (o.policy == SmallComponentPolicy::Error)
      throw NumericError("SWB: component " + std::to_string(k) + " has " + std::to_string(counts[k]) +
                         " draws, below the minimum " + std::to_string(o.min_component_count));
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < K; ++j) {
      if (j == k || mix.weight(j) == 0.0 || counts[j] < o.min_component_count) continue;
      const double dd = (mix.mean(j) - mix.mean(k)).squaredNorm();
      if (dd < bd) {
        bd = dd;
        best = j;
      }
    }
    if (best < 0) throw NumericError("SWB: no component has enough draws to merge into");
    group[k] = best;
  }
  std::map<int, std::vector<int>> members;
  for (int k = 0; k < K; ++k)
    if (mix.weight(k) > 0.0) members[group[k]].push_back(k);

  EstimatorReport rep;
  rep.method = "swb";
  double c_hat = 0.0, var = 0.0;
  for (const auto& [g, mem] : members) {
    double wg = 0.0;
    for (int k : mem) wg += mix.weight(k);
    // log of the stratum density sum_{m in G} (w_m / w_G) q_tilde_m.
    auto stratum_log = [&](const Eigen::VectorXd& z, int known_k, double known_lq) {
      Eigen::VectorXd terms(mem.size());
      for (std::size_t i = 0; i < mem.size(); ++i) {
        const int m = mem[i];
        const double l = (m == known_k) ? known_lq : target.log_q(mix.inverse_warp(z, m));
        terms[i] = std::log(mix.weight(m) / wg) + component_log_ratio(mix, z, m, l);
      }
      return log_sum_exp(terms);
    };
    std::vector<int> rows;
    for (std::size_t i = 0; i < psi.size(); ++i)
      for (int m : mem)
        if (psi[i] == m) rows.push_back(static_cast<int>(i));
    const int n1g = static_cast<int>(rows.size());
    Eigen::VectorXd a1(n1g), b1(n1g);
    for (int i = 0; i < n1g; ++i) {
      const Eigen::VectorXd z = zs.row(rows[i]).transpose();
      a1[i] = stratum_log(z, psi[rows[i]], lq[rows[i]]);
      b1[i] = log_std_normal(z);
    }
    const int n2 = o.n2_per_component;
    Eigen::VectorXd a2(n2), b2(n2);
    for (int j = 0; j < n2; ++j) {
      Eigen::VectorXd z(d);
      for (int t = 0; t < d; ++t) z[t] = rng.normal();
      a2[j] = stratum_log(z, -1, 0.0);
      b2[j] = log_std_normal(z);
    }
    const BridgeResult b = iterative_bridge(a1, b1, a2, b2);
    ComponentEstimate ce;
    ce.components = mem;
    ce.weight = wg;
    ce.c_hat = b.r;
    ce.n1 = n1g;
    ce.n2 = n2;
    ce.iterations = b.iterations;
    rep.per_component.push_back(ce);
    rep.iterations = std::max(rep.iterations, b.iterations);
    c_hat += wg * b.r;
    var += std::pow(wg * b.r * b.se_log, 2);
  }
  rep.c_hat = c_hat;
  rep.lambda_hat = std::log(c_hat);
  rep.se_hat = std::sqrt(var);
  rep.target_evals = target.eval_count() - before;
  return rep;
}

}  // namespace

EstimatorReport stochastic_warpu_bridge(const TargetDensity& target, const GaussianMixture& mix,
                                        const Eigen::MatrixXd& pi_samples, const SwbOptions& o, CounterRng& rng) {
  check_inputs(target, mix, pi_samples);
  if (pi_samples.rows() == 0) throw InputError("SWB: no draws from the target");
  const std::uint64_t before = target.eval_count();
  const Eigen::Index n1 = pi_samples.rows();
  std::vector<int> psi(n1);
  Eigen::MatrixXd zs(n1, mix.dim());
  Eigen::VectorXd lq(n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const Eigen::VectorXd x = pi_samples.row(i).transpose();
    psi[i] = draw_index(mix.responsibilities(x), rng.uniform());
    zs.row(i) = mix.forward_warp(x, psi[i]).transpose();
    lq[i] = target.log_q(x);
  }
  return swb_core(target, mix, psi, zs, lq, o, rng, before);
}

EstimatorReport stochastic_warpu_bridge_from_trace(const TargetDensity& target, const GaussianMixture& mix,
                                                   const SamplerTrace& trace, const SwbOptions& o,
                                                   CounterRng& rng) {
  if (!trace.has_cache()) throw InputError("trace carries no warp cache");
  if (trace.log_q_back.cols() != mix.size()) throw InputError("trace cache was built with a different K");
  const std::uint64_t before = target.eval_count();
  const int n1 = trace.size();
  Eigen::VectorXd lq(n1);
  for (int i = 0; i < n1; ++i) lq[i] = trace.log_q_back(i, trace.psi[i]);
  return swb_core(target, mix, trace.psi, trace.theta_star, lq, o, rng, before);
}

double predicted_pps_ratio(double beta, int K) {
  if (!(beta > 0.0) || K < 1) throw InputError("need beta > 0 and K >= 1");
  return (1.0 + beta) * K / (1.0 + beta * K);
}

}  // namespace warpu
