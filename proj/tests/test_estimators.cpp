#include "warpu/errors.hpp"
#include "warpu/estimators.hpp"
#include "warpu/numeric.hpp"
#include "warpu/targets.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

using namespace warpu;
using Catch::Approx;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

GaussianMixture mix1d(std::vector<double> w, std::vector<double> mu, std::vector<double> s) {
  std::vector<Eigen::VectorXd> m;
  for (double x : mu) m.push_back(v1(x));
  return GaussianMixture::isotropic(w, m, s);
}

TargetDensity mixture_density(const GaussianMixture& mix, double log_c = 0.0) {
  return TargetDensity(mix.dim(), [mix, log_c](const Eigen::VectorXd& x) { return log_c + mix.log_density(x); });
}

Eigen::MatrixXd draws(const GaussianMixture& mix, int n, CounterRng& rng) {
  Eigen::MatrixXd x(n, mix.dim());
  for (int i = 0; i < n; ++i) x.row(i) = mix.sample(rng).transpose();
  return x;
}

}  // namespace

TEST_CASE("bridge identities", "[bridge]") {
  CounterRng rng(1);
  Eigen::VectorXd a(500), b(300);
  for (auto& x : a) x = -0.5 * std::pow(rng.normal(), 2);
  for (auto& x : b) x = -0.5 * std::pow(rng.normal(), 2);
  // q1 = q2: r = 1 after one iteration.
  const auto same = iterative_bridge(a, a, b, b);
  CHECK(same.r == 1.0);
  CHECK(same.iterations == 1);
  // q1 = 7 q2.
  const Eigen::VectorXd a7 = a.array() + std::log(7.0), b7 = b.array() + std::log(7.0);
  CHECK(iterative_bridge(a7, a, b7, b).r == Approx(7.0).epsilon(1e-10));

  CHECK_THROWS_AS(iterative_bridge(a, a, Eigen::VectorXd(), Eigen::VectorXd()), InputError);
  const Eigen::VectorXd ninf = Eigen::VectorXd::Constant(3, kNegInf);
  CHECK_THROWS_AS(iterative_bridge(ninf, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), ninf), OverlapError);
  try {
    iterative_bridge(a7, a, b7, b, 1e-300, 1);
    FAIL("expected no convergence");
  } catch (const ConvergenceError& e) {
    CHECK(std::isfinite(e.last_iterate));
  }
}

TEST_CASE("bridge between two normals", "[bridge]") {
  // q1 = 2 N(0, 1), q2 = N(0.5, 1): r = 2.
  CounterRng rng(2);
  const int n = 100000;
  Eigen::VectorXd l11(n), l21(n), l12(n), l22(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(), y = 0.5 + rng.normal();
    l11[i] = std::log(2.0) - 0.5 * x * x;
    l21[i] = -0.5 * (x - 0.5) * (x - 0.5);
    l12[i] = std::log(2.0) - 0.5 * y * y;
    l22[i] = -0.5 * (y - 0.5) * (y - 0.5);
  }
  const auto r = iterative_bridge(l11, l21, l12, l22);
  CHECK(std::abs(r.log_r - std::log(2.0)) < 3.0 * r.se_log);
  CHECK(r.se_log > 0.0);

  // Order of the draws does not matter.
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::VectorXd p11(n), p21(n);
  for (int i = 0; i < n; ++i) {
    p11[i] = l11[perm[i]];
    p21[i] = l21[perm[i]];
  }
  CHECK(iterative_bridge(p11, p21, l12, l22).log_r == Approx(r.log_r).epsilon(1e-12));
}

TEST_CASE("estimators recover c on c times phi_mix", "[bridge]") {
  const auto mix = mix1d({0.3, 0.7}, {-3.0, 2.0}, {0.8, 1.2});
  const auto q = mixture_density(mix, std::log(10.0));
  CounterRng rng(3);
  const int n1 = 4000, n2 = 4000;
  const Eigen::MatrixXd pi = draws(mix, n1, rng);

  q.reset_count();
  const auto bs = classical_bridge_estimate(q, mix, pi, draws(mix, n2, rng));
  CHECK(bs.c_hat == Approx(10.0).epsilon(1e-10));  // q / phi_mix is constant
  CHECK(bs.target_evals == static_cast<std::uint64_t>(n1 + n2));

  const auto z = standard_normal_draws(n2, 1, rng);
  const auto wb = warpu_bridge_estimate(q, mix, pi, z, rng);
  CHECK(wb.c_hat == Approx(10.0).epsilon(1e-10));
  CHECK(wb.target_evals == static_cast<std::uint64_t>(2 * (n1 + n2)));
  CHECK_THROWS_AS(warpu_bridge_estimate(q, mix, pi, Eigen::MatrixXd(0, 1), rng), InputError);

  SwbOptions so;
  so.n2_per_component = 1000;
  const auto swb = stochastic_warpu_bridge(q, mix, pi, so, rng);
  CHECK(swb.c_hat == Approx(10.0).epsilon(1e-10));
  for (const auto& c : swb.per_component) CHECK(c.c_hat == Approx(10.0).epsilon(1e-10));
  CHECK(swb.target_evals == static_cast<std::uint64_t>(n1 + 2 * so.n2_per_component));
}

TEST_CASE("estimators on a mismatched three-mode target", "[bridge]") {
  const auto info = three_mode_1d_target();
  const auto fit = mix1d({0.3, 0.3, 0.4}, {-4.0, 0.5, 4.0}, {1.0, 1.5, 0.7});
  CounterRng rng(4);
  const int n = 20000;
  Eigen::MatrixXd pi(n, 1);
  for (int i = 0; i < n; ++i) pi.row(i) = info.sampler(rng).transpose();
  const auto wb = warpu_bridge_estimate(info.target, fit, pi, standard_normal_draws(n, 1, rng), rng);
  CHECK(std::abs(wb.c_hat - 1.0) < 3.0 * wb.se_hat);
  SwbOptions so;
  so.n2_per_component = n / 3;
  const auto swb = stochastic_warpu_bridge(info.target, fit, pi, so, rng);
  CHECK(std::abs(swb.c_hat - 1.0) < 3.0 * swb.se_hat);
  double recombined = 0.0;
  for (const auto& c : swb.per_component) recombined += c.weight * c.c_hat;
  CHECK(recombined == Approx(swb.c_hat).epsilon(1e-12));
  CHECK(std::log(swb.c_hat) == Approx(swb.lambda_hat).epsilon(1e-14));

  // Scale equivariance: q times 5 multiplies every estimate by 5.
  const auto q5 = info.target.rescaled(std::log(5.0));
  CounterRng r1(40), r2(40);
  const auto a = stochastic_warpu_bridge(info.target, fit, pi.topRows(2000), so, r1);
  const auto b = stochastic_warpu_bridge(q5, fit, pi.topRows(2000), so, r2);
  CHECK(b.c_hat == Approx(5.0 * a.c_hat).epsilon(1e-10));
  for (std::size_t k = 0; k < a.per_component.size(); ++k)
    CHECK(b.per_component[k].c_hat == Approx(5.0 * a.per_component[k].c_hat).epsilon(1e-10));

  const auto js = to_json(swb);
  CHECK(js.at("method") == "swb");
  CHECK(js.at("per_component").size() == 3);
  CHECK(js.at("target_evals").get<std::uint64_t>() == swb.target_evals);
}

TEST_CASE("SWB with one component matches WB in distribution", "[bridge]") {
  const auto info = three_mode_1d_target();
  const auto one = mix1d({1.0}, {0.0}, {4.0});
  CounterRng rng(5);
  std::vector<double> wb, swb;
  for (int rep = 0; rep < 60; ++rep) {
    Eigen::MatrixXd pi(1000, 1);
    for (int i = 0; i < 1000; ++i) pi.row(i) = info.sampler(rng).transpose();
    wb.push_back(warpu_bridge_estimate(info.target, one, pi, standard_normal_draws(1000, 1, rng), rng).c_hat);
    SwbOptions so;
    so.n2_per_component = 1000;
    swb.push_back(stochastic_warpu_bridge(info.target, one, pi, so, rng).c_hat);
  }
  auto stats = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / (v.size() - 1))};
  };
  const auto [m1, s1] = stats(wb);
  const auto [m2, s2] = stats(swb);
  CHECK(std::abs(m1 - m2) < 4.0 * std::sqrt((s1 * s1 + s2 * s2) / 60.0));
  CHECK(s1 / s2 == Approx(1.0).margin(0.4));
}

TEST_CASE("small strata", "[bridge]") {
  // Component 2 sits far from every draw.
  const auto fit = mix1d({0.45, 0.45, 0.1}, {-2.0, 2.0, 60.0}, {1.0, 1.0, 1.0});
  const auto truth = mix1d({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0});
  const auto q = mixture_density(truth);
  CounterRng rng(6);
  const Eigen::MatrixXd pi = draws(truth, 2000, rng);
  SwbOptions so;
  so.n2_per_component = 500;
  so.min_component_count = 5;
  CHECK_THROWS_AS(stochastic_warpu_bridge(q, fit, pi, so, rng), NumericError);
  so.policy = SmallComponentPolicy::MergeNearest;
  const auto r = stochastic_warpu_bridge(q, fit, pi, so, rng);
  REQUIRE(r.per_component.size() == 2);
  bool merged = false;
  for (const auto& c : r.per_component) merged |= c.components.size() == 2;
  CHECK(merged);
  CHECK(std::abs(r.c_hat - 1.0) < 0.1);
}

TEST_CASE("cached estimators reuse sampler work", "[bridge]") {
  const auto info = three_mode_1d_target();
  const auto fit = mix1d({0.3, 0.3, 0.4}, {-4.0, 0.5, 4.0}, {1.0, 1.5, 0.7});
  const int T = 3000, n2 = 1000;
  const auto tr = run_basic_warpu(info.target, fit, 1.0, T, v1(0.0), 7, true);
  REQUIRE(tr.has_cache());
  CHECK(tr.total_evals() == static_cast<std::uint64_t>(4 * T));
  CounterRng rng(8);
  const auto z = standard_normal_draws(n2, 1, rng);
  const auto wb = warpu_bridge_from_trace(info.target, fit, tr, z);
  CHECK(wb.target_evals == static_cast<std::uint64_t>(3 * n2));
  SwbOptions so;
  so.n2_per_component = n2;
  const auto swb = stochastic_warpu_bridge_from_trace(info.target, fit, tr, so, rng);
  CHECK(swb.target_evals == static_cast<std::uint64_t>(3 * n2));
  CHECK(std::abs(wb.c_hat - 1.0) < 0.1);
  CHECK(std::abs(swb.c_hat - 1.0) < 0.1);

  // The cached q tilde values agree with fresh evaluation.
  SamplerTrace bare = tr;
  bare.theta_star.resize(0, 0);
  CHECK_THROWS_AS(warpu_bridge_from_trace(info.target, fit, bare, z), InputError);
}

TEST_CASE("variance diagnostics", "[diagnostics]") {
  // Exact target: everything vanishes.
  const auto mix = mix1d({0.3, 0.7}, {-3.0, 2.0}, {0.8, 1.2});
  const auto q = mixture_density(mix, std::log(10.0));
  const auto d0 = asymptotic_variance_diagnostics(mix, q, 1000, 1000);
  CHECK(d0.c == Approx(10.0).epsilon(1e-8));
  CHECK(d0.chi2_wb == Approx(0.0).margin(1e-10));
  CHECK(d0.var_wb == Approx(0.0).margin(1e-10));
  CHECK(d0.var_swb == Approx(0.0).margin(1e-10));

  // Mismatched light-tailed target: the widest fitted component is wider
  // than every target component, so all divergences are finite.
  const auto info = three_mode_1d_target();
  const auto fit = mix1d({0.3, 0.4, 0.3}, {-4.6, 0.3, 4.2}, {0.9, 1.6, 1.1});
  const auto dq = asymptotic_variance_diagnostics(fit, info.target, 1000, 1000);
  CHECK_FALSE(dq.divergent);
  CHECK(dq.c == Approx(1.0).epsilon(1e-8));
  double pyth = 0.0;
  for (int k = 0; k < 3; ++k) pyth += dq.w_tilde[k] * dq.w_tilde[k] * dq.chi2_k[k];
  CHECK(dq.term_I + dq.term_II == Approx(pyth).epsilon(1e-12));
  CHECK(dq.term_II >= -1e-12);
  CHECK(dq.beta_1K == Approx(2.0 / (1.0 * 2 - 1.0)));

  // Monte Carlo agrees with quadrature.
  DiagnosticsOptions mc;
  mc.method = DiagnosticsOptions::Method::MonteCarlo;
  mc.seed = 9;
  const auto dm = asymptotic_variance_diagnostics(fit, info.target, 1000, 1000, mc);
  CHECK(std::abs(dm.chi2_wb - dq.chi2_wb) < 4.0 * dm.se_chi2_wb);
  CHECK(to_json(dm).at("method") == "monte_carlo");

  // Heavy tails against a Gaussian mixture: the chi-square integral diverges.
  const auto t = t_mixture_1d_target({0.4, 0.6}, {-3.0, 2.0}, {1.0, 0.8}, 4.0);
  const auto dt = asymptotic_variance_diagnostics(mix1d({0.4, 0.6}, {-3.0, 2.0}, {1.4, 1.1}), t.target, 1000, 1000);
  CHECK(dt.divergent);

  CHECK(predicted_pps_ratio(1.0, 5) == Approx(10.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("variance law on a light-tailed target", "[diagnostics]") {
  // (n1 + n2) Var(log c_hat) approaches the chi-square predictions.
  const auto info = three_mode_1d_target();
  const auto fit = mix1d({0.3, 0.4, 0.3}, {-4.6, 0.3, 4.2}, {0.9, 1.6, 1.1});
  const int n1 = 2000, n2 = 2000, reps = 300;
  const auto pred = asymptotic_variance_diagnostics(fit, info.target, n1, n2);
  CounterRng rng(10);
  std::vector<double> lw, ls;
  for (int r = 0; r < reps; ++r) {
    Eigen::MatrixXd pi(n1, 1);
    for (int i = 0; i < n1; ++i) pi.row(i) = info.sampler(rng).transpose();
    lw.push_back(warpu_bridge_estimate(info.target, fit, pi, standard_normal_draws(n2, 1, rng), rng).lambda_hat);
    SwbOptions so;
    so.n2_per_component = n2;
    ls.push_back(stochastic_warpu_bridge(info.target, fit, pi, so, rng).lambda_hat);
  }
  auto var = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  // With 300 replicates the variance itself carries about 8% sampling error.
  CHECK((n1 + n2) * var(lw) / pred.var_wb == Approx(1.0).margin(0.25));
  // For SWB, n2 counts phi draws per component: each stratum bridges about
  // n1 w_tilde_k warped draws against n2 fresh ones.
  CHECK((n1 + n2) * var(ls) / pred.var_swb == Approx(1.0).margin(0.25));
}
