#include "warpu/mixture_fit.hpp"

#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"
#include "warpu/rng.hpp"

#include <cmath>
#include <limits>

namespace warpu {

namespace {

constexpr double kRelSlack = 1e-12;

struct Params {
  Eigen::VectorXd w;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> cov;
};

// E-step. Fills log responsibilities and returns the mean log likelihood.
double e_step(const Eigen::MatrixXd& X, const Params& p, Eigen::MatrixXd& resp) {
  const Eigen::Index n = X.rows(), d = X.cols();
  const int K = static_cast<int>(p.w.size());
  resp.resize(n, K);
  for (int k = 0; k < K; ++k) {
    Eigen::LLT<Eigen::MatrixXd> llt(p.cov[k]);
    if (llt.info() != Eigen::Success) throw NumericError("EM: covariance lost positive definiteness");
    const Eigen::MatrixXd L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) logdet += std::log(L(i, i));
    const double lw = p.w[k] > 0.0 ? std::log(p.w[k]) : kNegInf;
    const Eigen::MatrixXd centred = (X.rowwise() - p.mu[k].transpose()).transpose();
    const Eigen::MatrixXd Z = L.triangularView<Eigen::Lower>().solve(centred);
    const Eigen::VectorXd sq = Z.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < n; ++i)
      resp(i, k) = lw - logdet - 0.5 * static_cast<double>(d) * kLog2Pi - 0.5 * sq[i];
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = resp.row(i).transpose();
    const double lse = log_sum_exp(row);
    ll += lse;
    resp.row(i) = (row.array() - lse).exp().transpose();
  }
  return ll / static_cast<double>(n);
}

Params kmeans_pp(const Eigen::MatrixXd& X, int K, CounterRng& rng, const Eigen::MatrixXd& global_cov) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> centres;
  centres.push_back(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
  Eigen::VectorXd dist = (X.rowwise() - X.row(centres[0])).rowwise().squaredNorm();
  while (static_cast<int>(centres.size()) < K) {
    const double total = dist.sum();
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    } else {
      pick = draw_index(dist, rng.uniform());
    }
    centres.push_back(pick);
    dist = dist.cwiseMin((X.rowwise() - X.row(pick)).rowwise().squaredNorm());
  }
  // One hard assignment pass to get starting covariances.
  Params p;
  p.w = Eigen::VectorXd::Constant(K, 1.0 / K);
  for (int k = 0; k < K; ++k) p.mu.push_back(X.row(centres[k]).transpose());
  std::vector<int> label(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double dd = (X.row(i).transpose() - p.mu[k]).squaredNorm();
      if (dd < best) {
        best = dd;
        label[i] = k;
      }
    }
  }
  for (int k = 0; k < K; ++k) {
    Eigen::Index cnt = 0;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      if (label[i] == k) {
        const Eigen::VectorXd c = X.row(i).transpose() - p.mu[k];
        C += c * c.transpose();
        ++cnt;
      }
    p.cov.push_back(cnt > static_cast<Eigen::Index>(X.cols()) ? Eigen::MatrixXd(C / static_cast<double>(cnt)) : global_cov);
  }
  return p;
}

}  // namespace

void FitConstraints::validate() const {
  if (k_max < 2) throw InputError("k_max must be at least 2");
  if (!(det_min > 0.0) || !(det_max >= det_min)) throw InputError("determinant bounds must satisfy 0 < min <= max");
  if (!(mean_bound > 0.0)) throw InputError("mean bound must be positive");
}

double mixture_log_likelihood(const GaussianMixture& mix, const Eigen::MatrixXd& samples) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) ll += mix.log_density(samples.row(i).transpose());
  return ll;
}

EmResult em_fit(const Eigen::MatrixXd& X, int K, const FitConstraints& constraints, const EmOptions& options) {
  constraints.validate();
  const Eigen::Index n = X.rows(), d = X.cols();
  if (K < 1) throw InputError("EM: K must be positive");
  if (K >= constraints.k_max) throw InputError("EM: K must be below k_max");
  if (n < static_cast<Eigen::Index>(K) * (d + 1)) throw InputError("EM: need at least K*(d+1) samples");
  if (!X.allFinite()) throw InputError("EM: samples contain non-finite values");

  CounterRng rng(options.seed);
  const Eigen::RowVectorXd gmean = X.colwise().mean();
  const Eigen::MatrixXd centred = X.rowwise() - gmean;
  Eigen::MatrixXd gcov = centred.transpose() * centred / static_cast<double>(n);
  const Eigen::VectorXd var = gcov.diagonal().cwiseMax(1e-300);
  const Eigen::MatrixXd ridge = (options.ridge * var).asDiagonal();
  gcov += ridge;

  Params p;
  if (options.warm_start) {
    const auto& ws = *options.warm_start;
    if (ws.size() != K || ws.dim() != d) throw InputError("EM: warm start has wrong shape");
    p.w = Eigen::Map<const Eigen::VectorXd>(ws.weights().data(), K);
    for (int k = 0; k < K; ++k) {
      p.mu.push_back(ws.mean(k));
      p.cov.push_back(ws.covariance(k));
    }
  } else {
    p = kmeans_pp(X, K, rng, gcov);
    for (auto& C : p.cov) C += ridge;
  }

  EmResult res;
  Eigen::MatrixXd resp;
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iter; ++it) {
    const double ll = e_step(X, p, resp);
    res.log_likelihood.push_back(ll * static_cast<double>(n));
    res.iterations = it + 1;
    if (it > 0 && std::abs(ll - prev) <= options.rel_tol * std::abs(ll)) {
      res.converged = true;
      break;
    }
    prev = ll;
    // M-step
    const Eigen::VectorXd Nk = resp.colwise().sum().transpose();
    for (int k = 0; k < K; ++k) {
      if (Nk[k] < static_cast<double>(d) + 1.0) {
        // Collapsed: restart at a random sample with the global covariance.
        ++res.reseeded;
        p.mu[k] = X.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n))).transpose();
        p.cov[k] = gcov;
        p.w[k] = 1.0 / K;
        continue;
      }
      p.w[k] = Nk[k] / static_cast<double>(n);
      p.mu[k] = (X.transpose() * resp.col(k)) / Nk[k];
      const Eigen::MatrixXd c = X.rowwise() - p.mu[k].transpose();
      p.cov[k] = (c.transpose() * resp.col(k).asDiagonal() * c) / Nk[k] + ridge;
    }
    p.w /= p.w.sum();
  }
  e_step(X, p, resp);
  res.responsibilities = resp;

  std::vector<double> w(p.w.data(), p.w.data() + K);
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  GaussianMixture fitted = GaussianMixture::from_covariances(std::move(w), p.mu, p.cov);
  res.mixture = enforce_constraints(fitted, constraints);
  return res;
}

GaussianMixture enforce_constraints(const GaussianMixture& mix, const FitConstraints& c) {
  c.validate();
  const int K = mix.size();
  const int d = mix.dim();
  std::vector<double> w(K);
  std::vector<Eigen::VectorXd> mu(K);
  std::vector<Eigen::MatrixXd> S(K);
  const double log_min = std::log(c.det_min), log_max = std::log(c.det_max);
  for (int k = 0; k < K; ++k) {
    w[k] = std::max(0.0, mix.weight(k));
    mu[k] = mix.mean(k);
    const double r = mu[k].norm();
    if (r > c.mean_bound * (1.0 + kRelSlack)) mu[k] *= c.mean_bound / r;
    S[k] = mix.scale(k);
    const double ld = mix.log_det(k);
    // Whole factor scaled so the shape is kept and only the volume changes.
    if (ld < log_min - kRelSlack * std::max(1.0, std::abs(log_min)))
      S[k] *= std::exp((log_min - ld) / d);
    else if (ld > log_max + kRelSlack * std::max(1.0, std::abs(log_max)))
      S[k] *= std::exp((log_max - ld) / d);
  }
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0)) throw NumericError("all mixture weights are zero");
  const bool renorm = std::abs(total - 1.0) > 1e-13;
  if (renorm)
    for (double& x : w) x /= total;
  return GaussianMixture(std::move(w), std::move(mu), std::move(S));
}

double update_schedule(int s) {
  if (s < 1) throw InputError("stage index starts at 1");
  return std::exp(1.0 - std::pow(static_cast<double>(s), 0.125));
}

std::vector<BicEntry> bic_sweep(const Eigen::MatrixXd& samples, const std::vector<int>& Ks,
                                const FitConstraints& constraints, const EmOptions& options) {
  std::vector<BicEntry> out;
  const double n = static_cast<double>(samples.rows());
  const double d = static_cast<double>(samples.cols());
  for (int K : Ks) {
    EmOptions o = options;
    o.warm_start.reset();
    const EmResult r = em_fit(samples, K, constraints, o);
    const double ll = mixture_log_likelihood(r.mixture, samples);
    const double params = (K - 1) + K * d + K * d * (d + 1) / 2.0;
    out.push_back({K, ll, -2.0 * ll + params * std::log(n)});
  }
  return out;
}

}  // namespace warpu
