#include "warpu/coupling.hpp"
#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"
#include "warpu/warp.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <numeric>
#include <cmath>
#include <ostream>

namespace warpu {

CoupledDraw maximal_coupling_draw(const Eigen::VectorXd& m1, const Eigen::VectorXd& m2, double sigma,
                                  CounterRng& rng) {
  if (m1.size() != m2.size()) throw InputError("coupling: means differ in dimension");
  if (!(sigma > 0.0)) throw InputError("coupling: scale must be positive");
  const auto d = m1.size();
  auto draw = [&](const Eigen::VectorXd& m) {
    Eigen::VectorXd x(d);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = m[i] + sigma * rng.normal();
    return x;
  };
  // Shared normalising constants cancel, only exponents matter.
  auto lp = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& m) { return -0.5 * (x - m).squaredNorm() / (sigma * sigma); };
  CoupledDraw out;
  out.x1 = draw(m1);
  if (lp(out.x1, m1) + std::log(rng.uniform()) <= lp(out.x1, m2)) {
    out.x2 = out.x1;
    out.same = true;
    return out;
  }
  for (;;) {
    Eigen::VectorXd y = draw(m2);
    if (lp(y, m2) + std::log(rng.uniform()) > lp(y, m1)) {
      out.x2 = std::move(y);
      return out;
    }
  }
}

CoupledDraw reflection_coupling_draw(const Eigen::VectorXd& m1, const Eigen::VectorXd& m2, double sigma,
                                     CounterRng& rng) {
  if (m1.size() != m2.size()) throw InputError("coupling: means differ in dimension");
  if (!(sigma > 0.0)) throw InputError("coupling: scale must be positive");
  const auto d = m1.size();
  Eigen::VectorXd xd(d);
  for (Eigen::Index i = 0; i < d; ++i) xd[i] = rng.normal();
  const Eigen::VectorXd z = (m1 - m2) / sigma;
  const double u = rng.uniform();
  CoupledDraw out;
  out.x1 = m1 + sigma * xd;
  const double zn = z.norm();
  if (zn == 0.0) {
    out.x2 = out.x1;
    out.same = true;
    return out;
  }
  // Accept the meeting move with probability min(1, phi(xd + z) / phi(xd)).
  if (std::log(u) <= -0.5 * (xd + z).squaredNorm() + 0.5 * xd.squaredNorm()) {
    out.x2 = out.x1;
    out.same = true;
  } else {
    const Eigen::VectorXd e = z / zn;
    out.x2 = m2 + sigma * (xd - 2.0 * e.dot(xd) * e);
  }
  return out;
}

ChainStepRecord record_of(const WarpStep& w) {
  ChainStepRecord r;
  r.has_step = true;
  r.warp_skipped = w.warp_skipped;
  r.theta_mh = w.theta_mh;
  r.theta_star = w.theta_star;
  r.psi = w.psi;
  r.psi_prime = w.psi_prime;
  r.nu = w.nu;
  return r;
}

namespace {

bool same_state(const ChainState& a, const ChainState& b) { return a.theta == b.theta; }

// Coupled local move; returns acceptance flags.
std::pair<bool, bool> coupled_local(ChainState& c1, ChainState& c2, const TargetDensity& target,
                                    const CoupledOptions& o, CounterRng& shared) {
  const bool use_hmc = o.hmc && shared.uniform() > o.hmc_rwm_prob;
  if (use_hmc) {
    Eigen::VectorXd p(c1.theta.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = shared.normal();
    const double logu = std::log(shared.uniform());
    auto move = [&](ChainState& c) {
      const double h0 = -c.log_q + 0.5 * p.squaredNorm();
      const LeapfrogResult r = leapfrog(target, c.theta, p, o.hmc_step, o.hmc_steps);
      if (!r.finite || r.log_q == kNegInf) return false;
      const double h1 = -r.log_q + 0.5 * r.momentum.squaredNorm();
      if (logu < h0 - h1) {
        c.theta = r.theta;
        c.log_q = r.log_q;
        return true;
      }
      return false;
    };
    return {move(c1), move(c2)};
  }
  const CoupledDraw d = o.proposal == ProposalCoupling::Maximal
                            ? maximal_coupling_draw(c1.theta, c2.theta, o.sigma, shared)
                            : reflection_coupling_draw(c1.theta, c2.theta, o.sigma, shared);
  const double logu = std::log(shared.uniform());
  auto accept = [&](ChainState& c, const Eigen::VectorXd& x) {
    const double lq = target.log_q(x);
    if (logu < lq - c.log_q) {
      c.theta = x;
      c.log_q = lq;
      return true;
    }
    return false;
  };
  const bool a1 = accept(c1, d.x1);
  const bool a2 = accept(c2, d.x2);
  return {a1, a2};
}

LocalKernel marginal_kernel(const CoupledOptions& o) {
  if (!o.hmc) return random_walk_kernel(o.sigma);
  return [o](ChainState& s, const TargetDensity& t) {
    if (s.rng.uniform() <= o.hmc_rwm_prob) return rwm_step(s, t, o.sigma);
    return hmc_step(s, t, o.hmc_step, o.hmc_steps).accepted;
  };
}

void finish_chain(ChainState& c, const ChainStepRecord& r, bool acc) {
  ++c.steps;
  if (acc) ++c.accepted;
  if (r.warp_skipped) ++c.warp_skipped;
  if (r.psi_prime != r.psi) ++c.mode_jumps;
}

// Separate variant: OT on varpi, then OT on nu.
void separate_indices(ChainState& c1, ChainState& c2, const TargetDensity& target, const GaussianMixture& mix,
                      CounterRng& shared, ChainStepRecord& r1, ChainStepRecord& r2) {
  const int K = mix.size();
  const SimplexVector w1 = mix.responsibilities(c1.theta);
  const SimplexVector w2 = mix.responsibilities(c2.theta);
  std::vector<Eigen::VectorXd> f1(K), f2(K);
  for (int k = 0; k < K; ++k) {
    f1[k] = mix.forward_warp(c1.theta, k);
    f2[k] = mix.forward_warp(c2.theta, k);
  }
  Eigen::MatrixXd cost(K, K);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) cost(a, b) = (f1[a] - f2[b]).squaredNorm();
  const auto [p1, p2] = sample_plan(discrete_ot_coupling(w1, w2, cost).joint, shared.uniform());
  r1.psi = p1;
  r2.psi = p2;
  r1.theta_star = f1[p1];
  r2.theta_star = f2[p2];

  InverseIndexDistribution n1, n2;
  bool ok1 = true, ok2 = true;
  try {
    n1 = inverse_index_distribution(mix, target, r1.theta_star);
  } catch (const DegenerateStateError&) {
    ok1 = false;
  }
  try {
    n2 = inverse_index_distribution(mix, target, r2.theta_star);
  } catch (const DegenerateStateError&) {
    ok2 = false;
  }
  const double u = shared.uniform();
  int q1 = p1, q2 = p2;
  if (ok1 && ok2) {
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) cost(a, b) = (n1.back_mapped[a] - n2.back_mapped[b]).squaredNorm();
    std::tie(q1, q2) = sample_plan(discrete_ot_coupling(n1.probs, n2.probs, cost).joint, u);
  } else if (ok1) {
    q1 = draw_index(n1.probs, u);
  } else if (ok2) {
    q2 = draw_index(n2.probs, u);
  }
  auto apply = [&](ChainState& c, ChainStepRecord& r, bool ok, InverseIndexDistribution& n, int q) {
    r.warp_skipped = !ok;
    r.psi_prime = ok ? q : r.psi;
    if (!ok) return;
    r.nu = n.probs;
    c.theta = n.back_mapped[q];
    c.log_q = n.log_q[q];
  };
  apply(c1, r1, ok1, n1, q1);
  apply(c2, r2, ok2, n2, q2);
}

// Full table of (psi, psi') outcomes for one chain. K^2 evaluations.
void outcome_table(const ChainState& c, const TargetDensity& target, const GaussianMixture& mix, ChainStepRecord& r,
                   std::vector<InverseIndexDistribution>& nus, std::vector<char>& ok) {
  const int K = mix.size();
  const SimplexVector w = mix.responsibilities(c.theta);
  r.outcome_probs = Eigen::MatrixXd::Zero(K, K);
  r.outcome_states.assign(static_cast<std::size_t>(K) * K, c.theta);
  nus.assign(K, {});
  ok.assign(K, 1);
  for (int p = 0; p < K; ++p) {
    const Eigen::VectorXd z = mix.forward_warp(c.theta, p);
    try {
      nus[p] = inverse_index_distribution(mix, target, z);
    } catch (const DegenerateStateError&) {
      ok[p] = 0;
      r.outcome_probs(p, p) = w[p];
      continue;
    }
    for (int pp = 0; pp < K; ++pp) {
      r.outcome_probs(p, pp) = w[p] * nus[p].probs[pp];
      r.outcome_states[static_cast<std::size_t>(p) * K + pp] = nus[p].back_mapped[pp];
    }
  }
}

void combined_indices(ChainState& c1, ChainState& c2, const TargetDensity& target, const GaussianMixture& mix,
                      CounterRng& shared, ChainStepRecord& r1, ChainStepRecord& r2) {
  const int K = mix.size();
  if (K > 64) throw InputError("combined coupling supports K <= 64");
  std::vector<InverseIndexDistribution> nu1, nu2;
  std::vector<char> ok1, ok2;
  outcome_table(c1, target, mix, r1, nu1, ok1);
  outcome_table(c2, target, mix, r2, nu2, ok2);
  const int KK = K * K;
  Eigen::VectorXd a(KK), b(KK);
  for (int p = 0; p < K; ++p)
    for (int pp = 0; pp < K; ++pp) {
      a[p * K + pp] = r1.outcome_probs(p, pp);
      b[p * K + pp] = r2.outcome_probs(p, pp);
    }
  a /= a.sum();
  b /= b.sum();
  Eigen::MatrixXd cost(KK, KK);
  for (int i = 0; i < KK; ++i)
    for (int j = 0; j < KK; ++j) cost(i, j) = (r1.outcome_states[i] - r2.outcome_states[j]).squaredNorm();
  const auto [i1, i2] = sample_plan(discrete_ot_coupling(a, b, cost).joint, shared.uniform());
  // Burn the second uniform the separate variant uses, so both variants read
  // the shared stream in step and K = 1 runs agree exactly.
  shared.uniform();
  auto apply = [&](ChainState& c, ChainStepRecord& r, std::vector<InverseIndexDistribution>& nus,
                   const std::vector<char>& ok, int idx) {
    r.psi = idx / K;
    r.psi_prime = idx % K;
    r.theta_star = mix.forward_warp(c.theta, r.psi);
    r.warp_skipped = !ok[r.psi];
    if (r.warp_skipped) return;
    r.nu = nus[r.psi].probs;
    c.log_q = nus[r.psi].log_q[r.psi_prime];
    c.theta = r.outcome_states[idx];
  };
  apply(c1, r1, nu1, ok1, i1);
  apply(c2, r2, nu2, ok2, i2);
}

}  // namespace

CoupledStep coupled_warpu_step(ChainState& c1, ChainState& c2, const TargetDensity& target,
                               const GaussianMixture& mix, const CoupledOptions& o, CounterRng& shared) {
  if (mix.dim() != target.dim()) throw InputError("mixture and target dimensions differ");
  CoupledStep out;
  if (same_state(c1, c2)) {
    // Already met: one update, copied.
    const WarpStep w = warpu_step(c1, target, mix, marginal_kernel(o));
    out.first = record_of(w);
    out.second = out.first;
    c2.theta = c1.theta;
    c2.log_q = c1.log_q;
    finish_chain(c2, out.second, w.accepted);
    out.met = true;
    return out;
  }
  const auto [a1, a2] = coupled_local(c1, c2, target, o, shared);
  out.first.has_step = out.second.has_step = true;
  out.first.theta_mh = c1.theta;
  out.second.theta_mh = c2.theta;
  if (o.combined)
    combined_indices(c1, c2, target, mix, shared, out.first, out.second);
  else
    separate_indices(c1, c2, target, mix, shared, out.first, out.second);
  finish_chain(c1, out.first, a1);
  finish_chain(c2, out.second, a2);
  out.met = same_state(c1, c2);
  return out;
}

double rao_blackwell_h(int level, const Eigen::VectorXd& theta, const ChainStepRecord& rec,
                       const GaussianMixture& mix, const TargetDensity& target,
                       const std::function<double(const Eigen::VectorXd&)>& h) {
  if (level < 0 || level > 2) throw InputError("Rao-Blackwell level must be 0, 1 or 2");
  if (level == 0 || !rec.has_step) return h(theta);
  if (level == 1) {
    if (rec.warp_skipped) return h(theta);
    double s = 0.0;
    for (int k = 0; k < mix.size(); ++k)
      if (rec.nu[k] > 0.0) s += rec.nu[k] * h(mix.inverse_warp(rec.theta_star, k));
    return s;
  }
  const int K = mix.size();
  if (rec.outcome_probs.rows() == K) {
    double s = 0.0;
    for (int p = 0; p < K; ++p)
      for (int pp = 0; pp < K; ++pp)
        if (rec.outcome_probs(p, pp) > 0.0) s += rec.outcome_probs(p, pp) * h(rec.outcome_states[p * K + pp]);
    return s / rec.outcome_probs.sum();
  }
  const SimplexVector w = mix.responsibilities(rec.theta_mh);
  double s = 0.0;
  for (int p = 0; p < K; ++p) {
    if (w[p] == 0.0) continue;
    const Eigen::VectorXd z = mix.forward_warp(rec.theta_mh, p);
    try {
      const InverseIndexDistribution nu = inverse_index_distribution(mix, target, z);
      double inner = 0.0;
      for (int pp = 0; pp < K; ++pp)
        if (nu.probs[pp] > 0.0) inner += nu.probs[pp] * h(nu.back_mapped[pp]);
      s += w[p] * inner;
    } catch (const DegenerateStateError&) {
      s += w[p] * h(rec.theta_mh);
    }
  }
  return s;
}

double unbiased_H(const std::vector<double>& h1, const std::vector<double>& h2, int tau, int j) {
  if (tau < 1 || j < 0) throw InputError("unbiased_H: need tau >= 1 and j >= 0");
  if (static_cast<int>(h1.size()) <= std::max(j, tau - 1) || static_cast<int>(h2.size()) < tau - 1)
    throw InputError("unbiased_H: traces shorter than needed");
  double s = h1[j];
  for (int t = j + 1; t <= tau - 1; ++t) s += h1[t] - h2[t - 1];
  return s;
}

double unbiased_H_lm(const std::vector<double>& h1, const std::vector<double>& h2, int tau, int l, int m) {
  if (l < 0 || m < l) throw InputError("unbiased_H_lm: need 0 <= l <= m");
  if (tau < 1) throw InputError("unbiased_H_lm: tau must be at least 1");
  if (static_cast<int>(h1.size()) <= std::max(m, tau - 1) || static_cast<int>(h2.size()) < tau - 1)
    throw InputError("unbiased_H_lm: traces shorter than needed");
  const double span = m - l + 1;
  double avg = 0.0;
  for (int k = l; k <= m; ++k) avg += h1[k];
  avg /= span;
  double corr = 0.0;
  for (int t = l + 1; t <= tau - 1; ++t) corr += std::min(1.0, (t - l) / span) * (h1[t] - h2[t - 1]);
  return avg + corr;
}

CoupledRun run_coupled_chains(const TargetDensity& target, const GaussianMixture& mix, const CoupledRunConfig& c) {
  if (c.init.dim() != target.dim()) throw InputError("initial density has wrong dimension");
  if (c.l < 0 || c.m < c.l) throw InputError("need 0 <= l <= m");
  for (int lv : c.levels)
    if (lv < 0 || lv > 2) throw InputError("levels must be 0, 1 or 2");
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t before = target.eval_count();
  CounterRng root(c.seed);
  CounterRng init_rng = root.split(4);
  CounterRng shared = root.split(3);
  const Eigen::VectorXd x0 = c.init.sample(init_rng);
  const Eigen::VectorXd y0 = c.init.sample(init_rng);
  ChainState c1 = make_chain(target, x0, root.split(1));
  ChainState c2 = make_chain(target, y0, root.split(2));

  const std::size_t L = c.levels.size(), H = c.h.size();
  CoupledRun run;
  run.h1.assign(L, std::vector<std::vector<double>>(H));
  run.h2.assign(L, std::vector<std::vector<double>>(H));
  auto push = [&](auto& store, const ChainState& s, const ChainStepRecord& r) {
    for (std::size_t li = 0; li < L; ++li)
      for (std::size_t hi = 0; hi < H; ++hi)
        store[li][hi].push_back(rao_blackwell_h(c.levels[li], s.theta, r, mix, target, c.h[hi]));
  };
  const ChainStepRecord none;
  push(run.h1, c1, none);
  push(run.h2, c2, none);
  push(run.h1, c1, record_of(warpu_step(c1, target, mix, marginal_kernel(c.step))));
  if (c1.theta == c2.theta) run.tau = 1;

  int t = 1;
  while (run.tau < 0 || t < std::max(c.m, run.tau)) {
    if (t >= c.max_iter) break;
    if (run.tau < 0) {
      const CoupledStep st = coupled_warpu_step(c1, c2, target, mix, c.step, shared);
      push(run.h1, c1, st.first);
      push(run.h2, c2, st.second);
      if (st.met) run.tau = t + 1;
    } else {
      // Keep the lagged chain moving through the coupled kernel so that
      // faithfulness is observed rather than assumed.
      const CoupledStep st = coupled_warpu_step(c1, c2, target, mix, c.step, shared);
      push(run.h1, c1, st.first);
      if (!(c1.theta == c2.theta)) run.faithful = false;
    }
    ++t;
  }
  run.evals = target.eval_count() - before;
  run.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return run;
}

void write_coupled_csv(const std::vector<CoupledRecord>& records, std::ostream& os) {
  os << "replicate,tau,h,level,H_lm,wall_ms\n";
  char buf[64];
  for (const auto& r : records) {
    os << r.replicate << ',' << r.tau << ',' << r.h << ',' << r.level << ',';
    auto e = std::to_chars(buf, buf + sizeof(buf), r.H_lm);
    os.write(buf, e.ptr - buf);
    os << ',';
    e = std::to_chars(buf, buf + sizeof(buf), r.wall_ms);
    os.write(buf, e.ptr - buf);
    os << '\n';
  }
}

SurvivalSummary meeting_time_survival(const std::vector<int>& taus) {
  if (taus.empty()) throw InputError("no meeting times");
  SurvivalSummary s;
  const int tmax = *std::max_element(taus.begin(), taus.end());
  const double n = static_cast<double>(taus.size());
  s.survival.resize(tmax + 1);
  for (int t = 0; t <= tmax; ++t)
    s.survival[t] = std::count_if(taus.begin(), taus.end(), [t](int x) { return x > t; }) / n;
  std::vector<double> xs, ys;
  for (int t = 0; t <= tmax; ++t)
    if (s.survival[t] >= 0.01 && s.survival[t] < 1.0) {
      xs.push_back(t);
      ys.push_back(std::log(s.survival[t]));
    }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    s.log_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  std::vector<int> sorted = taus;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  s.median = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  return s;
}

}  // namespace warpu
