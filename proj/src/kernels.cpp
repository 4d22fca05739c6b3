#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"
#include "warpu/samplers.hpp"
#include "warpu/warp.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace warpu {

ChainState make_chain(const TargetDensity& target, const Eigen::VectorXd& theta0, CounterRng rng) {
  if (theta0.size() != target.dim()) throw InputError("initial state has wrong dimension");
  ChainState s;
  s.theta = theta0;
  s.log_q = target.log_q(theta0);
  s.rng = rng;
  return s;
}

bool rwm_step(ChainState& s, const TargetDensity& target, double sigma) {
  if (!(sigma > 0.0)) throw InputError("random walk scale must be positive");
  Eigen::VectorXd prop(s.theta.size());
  for (Eigen::Index i = 0; i < prop.size(); ++i) prop[i] = s.theta[i] + sigma * s.rng.normal();
  const double lp = target.log_q(prop);
  const double logu = std::log(s.rng.uniform());
  if (logu < lp - s.log_q) {
    s.theta = std::move(prop);
    s.log_q = lp;
    return true;
  }
  return false;
}

LeapfrogResult leapfrog(const TargetDensity& target, Eigen::VectorXd theta, Eigen::VectorXd p, double eps, int L) {
  LeapfrogResult r;
  Eigen::VectorXd g = target.grad_log_q(theta);
  for (int l = 0; l < L; ++l) {
    p += 0.5 * eps * g;
    theta += eps * p;
    g = target.grad_log_q(theta);
    p += 0.5 * eps * g;
    if (!theta.allFinite() || !p.allFinite()) {
      r.finite = false;
      break;
    }
  }
  r.theta = std::move(theta);
  r.momentum = std::move(p);
  r.log_q = r.finite ? target.log_q(r.theta) : kNegInf;
  return r;
}

HmcOutcome hmc_step(ChainState& s, const TargetDensity& target, double eps, int L) {
  if (!(eps > 0.0) || L < 1) throw InputError("HMC needs a positive step size and at least one leapfrog step");
  HmcOutcome out;
  Eigen::VectorXd p(s.theta.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = s.rng.normal();
  const double h0 = -s.log_q + 0.5 * p.squaredNorm();
  const LeapfrogResult r = leapfrog(target, s.theta, p, eps, L);
  const double logu = std::log(s.rng.uniform());
  if (!r.finite || r.log_q == kNegInf) {
    out.divergent = true;
    return out;
  }
  const double h1 = -r.log_q + 0.5 * r.momentum.squaredNorm();
  out.energy_error = h1 - h0;
  out.divergent = !std::isfinite(out.energy_error) || out.energy_error > 1000.0;
  if (logu < -(h1 - h0)) {
    s.theta = r.theta;
    s.log_q = r.log_q;
    out.accepted = true;
  }
  return out;
}

LocalKernel random_walk_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InputError("random walk scale must be positive");
  return [sigma](ChainState& s, const TargetDensity& t) { return rwm_step(s, t, sigma); };
}

LocalKernel hmc_kernel(double step_size, int n_steps) {
  return [step_size, n_steps](ChainState& s, const TargetDensity& t) {
    return hmc_step(s, t, step_size, n_steps).accepted;
  };
}

LocalKernel identity_kernel() {
  return [](ChainState&, const TargetDensity&) { return false; };
}

WarpStep warpu_step(ChainState& s, const TargetDensity& target, const GaussianMixture& mix, const LocalKernel& kernel,
                    double anneal) {
  if (mix.dim() != target.dim()) throw InputError("mixture and target dimensions differ");
  WarpStep out;
  const std::uint64_t before = target.eval_count();
  out.accepted = kernel(s, target);
  out.theta_mh = s.theta;

  const SimplexVector varpi = mix.responsibilities(s.theta);
  out.psi = draw_index(varpi, s.rng.uniform());
  out.theta_star = mix.forward_warp(s.theta, out.psi);
  try {
    InverseIndexDistribution nu = inverse_index_distribution(mix, target, out.theta_star);
    out.nu = anneal == 1.0 ? nu.probs : annealed_inverse_index(nu.probs, anneal);
    out.psi_prime = draw_index(out.nu, s.rng.uniform());
    out.log_q_back = std::move(nu.log_q);
    s.theta = std::move(nu.back_mapped[out.psi_prime]);
    s.log_q = out.log_q_back[out.psi_prime];
  } catch (const DegenerateStateError&) {
    // Keep the local-move state; the warp is skipped and counted.
    out.warp_skipped = true;
    ++s.warp_skipped;
    out.psi_prime = out.psi;
    out.log_q_back = Eigen::VectorXd::Constant(mix.size(), kNegInf);
    s.rng.uniform();
  }
  ++s.steps;
  if (out.accepted) ++s.accepted;
  if (out.psi_prime != out.psi) ++s.mode_jumps;
  out.evals = target.eval_count() - before;
  return out;
}

std::uint64_t SamplerTrace::total_evals() const {
  std::uint64_t t = 0;
  for (auto e : evals) t += e;
  return t;
}

void SamplerTrace::resize(int T, int d, int K, bool cache, int aux_cols) {
  samples.resize(T, d);
  log_q.resize(T);
  accepted.assign(T, 0);
  psi.assign(T, -1);
  psi_prime.assign(T, -1);
  evals.assign(T, 0);
  if (cache) {
    theta_star.resize(T, d);
    log_q_back.resize(T, K);
  }
  if (aux_cols > 0) aux.resize(T, aux_cols);
}

void SamplerTrace::record(int t, const ChainState& s, bool acc, int p, int pp, std::uint64_t ev) {
  samples.row(t) = s.theta.transpose();
  log_q[t] = s.log_q;
  accepted[t] = acc ? 1 : 0;
  psi[t] = p;
  psi_prime[t] = pp;
  evals[t] = ev;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

}  // namespace

void write_trace_csv(const SamplerTrace& tr, std::ostream& os) {
  os << "step,accepted,psi,psi_prime";
  for (int i = 0; i < tr.dim(); ++i) os << ",theta_" << (i + 1);
  os << '\n';
  for (int t = 0; t < tr.size(); ++t) {
    os << t << ',' << int(tr.accepted[t]) << ',' << tr.psi[t] << ',' << tr.psi_prime[t];
    for (int i = 0; i < tr.dim(); ++i) {
      os << ',';
      put(os, tr.samples(t, i));
    }
    os << '\n';
  }
}

SamplerTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("trace: empty input");
  int d = 0;
  {
    std::stringstream h(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(h, tok, ',')) cols.push_back(tok);
    if (cols.size() < 5 || cols[0] != "step" || cols[1] != "accepted" || cols[2] != "psi" || cols[3] != "psi_prime")
      throw InputError("trace: unexpected header");
    d = static_cast<int>(cols.size()) - 4;
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* q = std::find(p, end, ',');
      double v = 0.0;
      auto res = std::from_chars(p, q, v);
      if (res.ec != std::errc()) throw InputError("trace: bad number in row " + std::to_string(rows.size() + 1));
      r.push_back(v);
      p = q + 1;
    }
    if (static_cast<int>(r.size()) != d + 4) throw InputError("trace: wrong column count");
    rows.push_back(std::move(r));
  }
  SamplerTrace tr;
  tr.resize(static_cast<int>(rows.size()), d, 0, false);
  tr.log_q.setConstant(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    tr.accepted[t] = static_cast<std::uint8_t>(rows[t][1]);
    tr.psi[t] = static_cast<int>(rows[t][2]);
    tr.psi_prime[t] = static_cast<int>(rows[t][3]);
    for (int i = 0; i < d; ++i) tr.samples(static_cast<Eigen::Index>(t), i) = rows[t][4 + i];
  }
  return tr;
}

SamplerTrace run_warpu(ChainState& s, const TargetDensity& target, const GaussianMixture& mix,
                       const LocalKernel& kernel, const WarpuRunOptions& o) {
  if (o.T < 0) throw InputError("T must be nonnegative");
  SamplerTrace tr;
  tr.resize(o.T, target.dim(), mix.size(), o.keep_cache);
  for (int t = 0; t < o.T; ++t) {
    WarpStep w = warpu_step(s, target, mix, kernel, o.anneal);
    tr.record(t, s, w.accepted, w.psi, w.psi_prime, w.evals);
    if (o.keep_cache) {
      tr.theta_star.row(t) = w.theta_star.transpose();
      tr.log_q_back.row(t) = w.log_q_back.transpose();
    }
  }
  return tr;
}

SamplerTrace run_basic_warpu(const TargetDensity& target, const GaussianMixture& mix, double sigma, int T,
                             const Eigen::VectorXd& theta0, std::uint64_t seed, bool keep_cache) {
  ChainState s = make_chain(target, theta0, CounterRng(seed));
  return run_warpu(s, target, mix, random_walk_kernel(sigma), {T, 1.0, keep_cache});
}

SamplerTrace run_rwm(const TargetDensity& target, double sigma, int T, const Eigen::VectorXd& theta0,
                     std::uint64_t seed) {
  ChainState s = make_chain(target, theta0, CounterRng(seed));
  SamplerTrace tr;
  tr.resize(T, target.dim(), 0, false);
  for (int t = 0; t < T; ++t) {
    const std::uint64_t before = target.eval_count();
    const bool acc = rwm_step(s, target, sigma);
    tr.record(t, s, acc, -1, -1, target.eval_count() - before);
  }
  return tr;
}

SamplerTrace run_mixture_mh(const TargetDensity& target, const GaussianMixture& mix, int T,
                            const Eigen::VectorXd& theta0, std::uint64_t seed) {
  if (mix.dim() != target.dim()) throw InputError("mixture and target dimensions differ");
  ChainState s = make_chain(target, theta0, CounterRng(seed));
  double log_ratio = s.log_q - mix.log_density(s.theta);
  SamplerTrace tr;
  tr.resize(T, target.dim(), 0, false);
  for (int t = 0; t < T; ++t) {
    const std::uint64_t before = target.eval_count();
    Eigen::VectorXd prop = mix.sample(s.rng);
    const double lq = target.log_q(prop);
    const double lr = lq - mix.log_density(prop);
    bool acc = false;
    if (std::log(s.rng.uniform()) < lr - log_ratio) {
      s.theta = std::move(prop);
      s.log_q = lq;
      log_ratio = lr;
      acc = true;
      ++s.accepted;
    }
    ++s.steps;
    tr.record(t, s, acc, -1, -1, target.eval_count() - before);
  }
  return tr;
}

}  // namespace warpu
