#include "warpu/targets.hpp"

#include "warpu/config.hpp"
#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <memory>

namespace warpu {

TargetInfo gaussian_mixture_target(const std::string& name, const GaussianMixture& mix, double log_c) {
  auto m = std::make_shared<GaussianMixture>(mix);
  // Precision matrices for the gradient.
  auto prec = std::make_shared<std::vector<Eigen::MatrixXd>>();
  for (int k = 0; k < mix.size(); ++k) prec->push_back(mix.covariance(k).inverse());
  TargetDensity t(
      mix.dim(), [m, log_c](const Eigen::VectorXd& x) { return log_c + m->log_density(x); },
      [m, prec](const Eigen::VectorXd& x) {
        const SimplexVector r = m->responsibilities(x);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
        for (int k = 0; k < m->size(); ++k) g -= r[k] * ((*prec)[k] * (x - m->mean(k)));
        return g;
      });
  TargetInfo info{name, t, log_c, {}, {}, mix};
  for (int k = 0; k < mix.size(); ++k) info.centres.push_back(mix.mean(k));
  info.sampler = [m](CounterRng& rng) { return m->sample(rng); };
  return info;
}

TargetInfo five_mode_target(int dim, std::optional<double> c) {
  if (dim < 1) throw InputError("dimension must be positive");
  const double centres[5] = {-11.0, 12.0, -8.0, 7.0, -2.0};
  std::vector<double> w;
  std::vector<Eigen::VectorXd> mu;
  for (int k = 0; k < 5; ++k) {
    w.push_back((k + 1) / 15.0);
    mu.push_back(Eigen::VectorXd::Constant(dim, centres[k]));
  }
  const auto mix = GaussianMixture::isotropic(w, mu, std::vector<double>(5, 1.0));
  const double log_c = c ? std::log(*c) : 0.5 * dim * kLog2Pi;
  return gaussian_mixture_target("five_mode", mix, log_c);
}

TargetInfo unequal_variance_target(int dim, double s1sq, double s2sq) {
  if (dim < 1 || !(s1sq > 0.0) || !(s2sq > 0.0)) throw InputError("bad unequal-variance target parameters");
  const auto mix = GaussianMixture::isotropic({0.5, 0.5}, {Eigen::VectorXd::Constant(dim, -1.0), Eigen::VectorXd::Ones(dim)},
                                              {std::sqrt(s1sq), std::sqrt(s2sq)});
  return gaussian_mixture_target("unequal_variance", mix, 0.5 * dim * kLog2Pi);
}

TargetInfo block_variance_target(int dim, std::uint64_t seed) {
  if (dim < 5 || dim % 5 != 0) throw InputError("block target needs a dimension that is a multiple of 5");
  const double v1[5] = {0.25, 0.3, 0.35, 0.4, 0.45};
  const double v2[5] = {1.0, 0.95, 0.9, 0.85, 0.8};
  CounterRng rng(seed);
  Eigen::VectorXd m1(dim), m2(dim);
  for (int i = 0; i < dim; ++i) m1[i] = -2.5 + (1.0 - rng.uniform());
  for (int i = 0; i < dim; ++i) m2[i] = 1.5 + (1.0 - rng.uniform());
  Eigen::MatrixXd S1 = Eigen::MatrixXd::Zero(dim, dim), S2 = S1;
  const int b = dim / 5;
  for (int i = 0; i < dim; ++i) {
    S1(i, i) = std::sqrt(v1[i / b]);
    S2(i, i) = std::sqrt(v2[i / b]);
  }
  const GaussianMixture mix({0.5, 0.5}, {m1, m2}, {S1, S2});
  return gaussian_mixture_target("block_variance", mix, 0.5 * dim * kLog2Pi);
}

double skew_t_log_density(const SkewTComponent& c, const Eigen::VectorXd& x) {
  const double d = static_cast<double>(x.size());
  const double nu = c.df;
  Eigen::LLT<Eigen::MatrixXd> llt(c.omega);
  if (llt.info() != Eigen::Success) throw NumericError("skew-t scale matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::VectorXd diff = x - c.xi;
  const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(diff);
  const double Q = z.squaredNorm();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += std::log(L(i, i));
  const double log_t = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * M_PI) - logdet -
                       0.5 * (nu + d) * std::log1p(Q / nu);
  const Eigen::VectorXd omega_sd = c.omega.diagonal().cwiseSqrt();
  const double arg = c.alpha.dot(diff.cwiseQuotient(omega_sd)) * std::sqrt((nu + d) / (Q + nu));
  if (arg == 0.0) return std::log(2.0) + log_t - std::log(2.0);
  const boost::math::students_t_distribution<double> T(nu + d);
  const double cdf = boost::math::cdf(T, arg);
  return std::log(2.0) + log_t + (cdf > 0.0 ? std::log(cdf) : kNegInf);
}

Eigen::VectorXd skew_t_sample(const SkewTComponent& c, CounterRng& rng) {
  const Eigen::Index d = c.xi.size();
  const Eigen::VectorXd omega_sd = c.omega.diagonal().cwiseSqrt();
  const Eigen::MatrixXd corr = omega_sd.cwiseInverse().asDiagonal() * c.omega * omega_sd.cwiseInverse().asDiagonal();
  const double denom = std::sqrt(1.0 + c.alpha.dot(corr * c.alpha));
  const Eigen::VectorXd delta = corr * c.alpha / denom;
  // Skew-normal: Z = delta |U0| + U1 with U1 ~ N(0, corr - delta delta^T).
  Eigen::LLT<Eigen::MatrixXd> llt(corr - delta * delta.transpose() + 1e-14 * Eigen::MatrixXd::Identity(d, d));
  Eigen::VectorXd e(d);
  for (Eigen::Index i = 0; i < d; ++i) e[i] = rng.normal();
  const Eigen::VectorXd z = delta * std::abs(rng.normal()) + llt.matrixL() * e;
  const double v = rng.chi_squared(c.df);
  return c.xi + omega_sd.cwiseProduct(z) / std::sqrt(v / c.df);
}

TargetInfo skew_t_mixture_target(std::vector<double> weights, std::vector<SkewTComponent> comps, double c) {
  if (weights.size() != comps.size() || comps.empty()) throw InputError("skew-t mixture: bad component list");
  if (!(c > 0.0)) throw InputError("skew-t mixture: c must be positive");
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  const int d = static_cast<int>(comps[0].xi.size());
  auto W = std::make_shared<std::vector<double>>(weights);
  auto C = std::make_shared<std::vector<SkewTComponent>>(comps);
  const double log_c = std::log(c);
  TargetDensity t(d, [W, C, log_c](const Eigen::VectorXd& x) {
    Eigen::VectorXd terms(W->size());
    for (std::size_t k = 0; k < W->size(); ++k) terms[k] = std::log((*W)[k]) + skew_t_log_density((*C)[k], x);
    return log_c + log_sum_exp(terms);
  });
  TargetInfo info{"skew_t_mixture", t, log_c, {}, {}, std::nullopt};
  for (const auto& s : comps) info.centres.push_back(s.xi);
  info.sampler = [W, C](CounterRng& rng) {
    const Eigen::Map<const Eigen::VectorXd> w(W->data(), static_cast<Eigen::Index>(W->size()));
    return skew_t_sample((*C)[draw_index(w, rng.uniform())], rng);
  };
  return info;
}

TargetInfo random_skew_t_mixture(int dim, int K, double df, double max_skew, std::uint64_t seed, double c) {
  if (dim < 1 || K < 1 || !(df > 0.0)) throw InputError("skew-t mixture: bad parameters");
  CounterRng rng(seed);
  auto unif = [&](double a, double b) { return a + (b - a) * (1.0 - rng.uniform()); };
  std::vector<double> w;
  std::vector<SkewTComponent> comps;
  for (int k = 0; k < K; ++k) {
    SkewTComponent s;
    s.df = df;
    s.xi.resize(dim);
    for (int i = 0; i < dim; ++i) s.xi[i] = unif(-6.0, 6.0);
    Eigen::MatrixXd A(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) A(i, j) = unif(-0.5, 0.5);
    Eigen::VectorXd sd(dim);
    for (int i = 0; i < dim; ++i) sd[i] = unif(0.6, 1.4);
    Eigen::MatrixXd R = A * A.transpose() + Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd rs = R.diagonal().cwiseSqrt().cwiseInverse();
    R = rs.asDiagonal() * R * rs.asDiagonal();
    s.omega = sd.asDiagonal() * R * sd.asDiagonal();
    s.alpha.resize(dim);
    for (int i = 0; i < dim; ++i) s.alpha[i] = unif(-max_skew, max_skew);
    comps.push_back(std::move(s));
    w.push_back(unif(0.5, 1.5));
  }
  return skew_t_mixture_target(std::move(w), std::move(comps), c);
}

TargetInfo three_mode_1d_target() {
  std::vector<Eigen::VectorXd> mu{Eigen::VectorXd::Constant(1, -5.0), Eigen::VectorXd::Constant(1, 0.0),
                                  Eigen::VectorXd::Constant(1, 4.5)};
  const auto mix = GaussianMixture::isotropic({0.25, 0.45, 0.30}, mu, {0.7, 1.3, 0.9});
  return gaussian_mixture_target("three_mode_1d", mix, 0.0);
}

TargetInfo t_mixture_1d_target(std::vector<double> weights, std::vector<double> locs, std::vector<double> scales,
                               double df) {
  const std::size_t K = weights.size();
  if (K == 0 || locs.size() != K || scales.size() != K || !(df > 0.0)) throw InputError("t mixture: bad parameters");
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  auto W = std::make_shared<std::vector<double>>(weights);
  auto Lc = std::make_shared<std::vector<double>>(locs);
  auto Sc = std::make_shared<std::vector<double>>(scales);
  const double lnorm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * M_PI);
  TargetDensity t(1, [=](const Eigen::VectorXd& x) {
    Eigen::VectorXd terms(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
      const double z = (x[0] - (*Lc)[k]) / (*Sc)[k];
      terms[k] = std::log((*W)[k]) + lnorm - std::log((*Sc)[k]) - 0.5 * (df + 1.0) * std::log1p(z * z / df);
    }
    return log_sum_exp(terms);
  });
  TargetInfo info{"t_mixture_1d", t, 0.0, {}, {}, std::nullopt};
  for (double l : locs) info.centres.push_back(Eigen::VectorXd::Constant(1, l));
  info.sampler = [=](CounterRng& rng) {
    const Eigen::Map<const Eigen::VectorXd> w(W->data(), static_cast<Eigen::Index>(K));
    const int k = draw_index(w, rng.uniform());
    const double z = rng.normal() / std::sqrt(rng.chi_squared(df) / df);
    return Eigen::VectorXd::Constant(1, (*Lc)[k] + (*Sc)[k] * z);
  };
  return info;
}

TargetInfo bimodal_2d_target() {
  Eigen::MatrixXd C1(2, 2), C2(2, 2);
  C1 << 1.0, 0.3, 0.3, 1.0;
  C2 << 0.8, -0.2, -0.2, 1.2;
  Eigen::VectorXd m1(2), m2(2);
  m1 << -3.0, -3.0;
  m2 << 3.0, 3.0;
  const auto mix = GaussianMixture::from_covariances({0.4, 0.6}, {m1, m2}, {C1, C2});
  return gaussian_mixture_target("bimodal_2d", mix, 0.0);
}

TargetInfo trimodal_5d_target() {
  Eigen::VectorXd m3(5);
  m3 << 2.5, -2.5, 2.5, -2.5, 2.5;
  const auto mix = GaussianMixture::isotropic({0.3, 0.3, 0.4},
                                              {Eigen::VectorXd::Constant(5, -2.5), Eigen::VectorXd::Constant(5, 2.5), m3},
                                              {0.9, 1.0, 1.1});
  return gaussian_mixture_target("trimodal_5d", mix, 0.0);
}

std::pair<double, double> mixture_sum_moments(const GaussianMixture& mix) {
  double m1 = 0.0, m2 = 0.0;
  for (int k = 0; k < mix.size(); ++k) {
    m1 += mix.weight(k) * mix.mean(k).sum();
    m2 += mix.weight(k) * (mix.mean(k).squaredNorm() + mix.covariance(k).trace());
  }
  return {m1, m2};
}

namespace {

std::vector<Eigen::VectorXd> to_vectors(const std::vector<std::vector<double>>& rows) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& r : rows) out.push_back(Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
  return out;
}

}  // namespace

TargetInfo make_target(const nlohmann::json& spec) {
  std::vector<std::string> problems;
  JsonFields f(spec, "target", problems);
  const std::string name = f.req<std::string>("name");
  throw_if_problems(problems);
  std::optional<TargetInfo> out;
  if (name == "five_mode") {
    const int dim = f.get<int>("dim", 4);
    const auto c = f.opt<double>("c");
    f.finish();
    throw_if_problems(problems);
    out = five_mode_target(dim, c);
  } else if (name == "unequal_variance") {
    const int dim = f.get<int>("dim", 30);
    const auto v = f.get<std::vector<double>>("variances", {0.8, 0.2});
    f.check(v.size() == 2, "variances", "needs two entries");
    f.finish();
    throw_if_problems(problems);
    out = unequal_variance_target(dim, v[0], v[1]);
  } else if (name == "block_variance") {
    const int dim = f.get<int>("dim", 30);
    const auto seed = f.get<std::uint64_t>("seed", 1);
    f.finish();
    throw_if_problems(problems);
    out = block_variance_target(dim, seed);
  } else if (name == "skew_t_mixture") {
    const int dim = f.get<int>("dim", 2);
    const int K = f.get<int>("components", 5);
    const double df = f.get<double>("df", 12.0);
    const double skew = f.get<double>("max_skew", 4.0);
    const auto seed = f.get<std::uint64_t>("seed", 7);
    const double c = f.get<double>("c", 1.0);
    f.finish();
    throw_if_problems(problems);
    out = random_skew_t_mixture(dim, K, df, skew, seed, c);
  } else if (name == "three_mode_1d") {
    f.finish();
    throw_if_problems(problems);
    out = three_mode_1d_target();
  } else if (name == "t_mixture_1d") {
    const auto w = f.get<std::vector<double>>("weights", {0.4, 0.6});
    const auto loc = f.get<std::vector<double>>("locs", {-3.0, 2.0});
    const auto sc = f.get<std::vector<double>>("scales", {1.0, 0.8});
    const double df = f.get<double>("df", 4.0);
    f.finish();
    throw_if_problems(problems);
    out = t_mixture_1d_target(w, loc, sc, df);
  } else if (name == "bimodal_2d") {
    f.finish();
    throw_if_problems(problems);
    out = bimodal_2d_target();
  } else if (name == "trimodal_5d") {
    f.finish();
    throw_if_problems(problems);
    out = trimodal_5d_target();
  } else if (name == "gaussian_mixture") {
    const auto w = f.req<std::vector<double>>("weights");
    const auto means = f.req<std::vector<std::vector<double>>>("means");
    const auto sds = f.req<std::vector<double>>("sds");
    const double c = f.get<double>("c", 1.0);
    f.finish();
    throw_if_problems(problems);
    out = gaussian_mixture_target("gaussian_mixture", GaussianMixture::isotropic(w, to_vectors(means), sds), std::log(c));
  } else {
    problems.push_back("target.name: unknown target '" + name + "'");
    throw_if_problems(problems);
  }
  return *out;
}

}  // namespace warpu
