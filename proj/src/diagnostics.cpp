#include "warpu/divergence.hpp"
#include "warpu/errors.hpp"
#include "warpu/estimators.hpp"
#include "warpu/numeric.hpp"
#include "warpu/warp.hpp"

#include <cmath>

namespace warpu {

namespace {

// r_k(z) = q(H_k z) / phi_mix(H_k z) for every k. K evaluations.
Eigen::VectorXd ratios(const GaussianMixture& mix, const TargetDensity& target, const Eigen::VectorXd& z) {
  Eigen::VectorXd r(mix.size());
  for (int k = 0; k < mix.size(); ++k) {
    const Eigen::VectorXd x = mix.inverse_warp(z, k);
    const double lq = target.log_q(x);
    r[k] = lq == kNegInf ? 0.0 : std::exp(lq - mix.log_density(x));
  }
  return r;
}

void finish(VarianceDiagnostics& d, const GaussianMixture& mix) {
  const int K = mix.size();
  d.w_tilde.resize(K);
  for (int k = 0; k < K; ++k) d.w_tilde[k] = mix.weight(k) * d.c_k[k] / d.c;
  d.var_wb = d.chi2_wb;
  d.var_swb = 0.0;
  double sum_sq = 0.0;
  for (int k = 0; k < K; ++k) {
    const double wt = d.w_tilde[k];
    if (wt == 0.0) continue;
    d.var_swb += wt * wt * (1.0 + d.beta) / (wt + d.beta) * d.chi2_k[k];
    sum_sq += wt * wt * d.chi2_k[k];
  }
  d.term_I = d.chi2_wb / K;
  d.term_II = sum_sq - d.term_I;
  const double denom = d.beta * (K - 1) - 1.0;
  d.beta_1K = denom > 0.0 ? (d.beta + 1.0) / denom : std::numeric_limits<double>::infinity();
  d.condition_holds = denom > 0.0 && d.term_I >= d.beta_1K * d.term_II;
}

}  // namespace

VarianceDiagnostics asymptotic_variance_diagnostics(const GaussianMixture& mix, const TargetDensity& target, int n1,
                                                    int n2, const DiagnosticsOptions& o) {
  if (mix.dim() != target.dim()) throw InputError("mixture and target dimensions differ");
  if (n1 < 1 || n2 < 1) throw InputError("sample sizes must be positive");
  const int K = mix.size();
  const int d = mix.dim();
  VarianceDiagnostics out;
  out.beta = static_cast<double>(n2) / n1;
  const bool quad = o.method == DiagnosticsOptions::Method::Quadrature ||
                    (o.method == DiagnosticsOptions::Method::Auto && d <= 2);
  if (quad && d > 2) throw InputError("quadrature diagnostics need d <= 2");

  if (quad) {
    out.method = "quadrature";
    QuadratureBox box{Eigen::VectorXd::Constant(d, -o.half_width), Eigen::VectorXd::Constant(d, o.half_width)};
    auto integrate = [&](const std::function<double(const Eigen::VectorXd&)>& f) {
      const double a = integrate_box(f, box);
      QuadratureBox wide{1.5 * box.lower, 1.5 * box.upper};
      const double b = integrate_box(f, wide);
      if (!std::isfinite(a) || !std::isfinite(b) || std::abs(b - a) > 1e-6 * std::max(1.0, std::abs(b)))
        out.divergent = true;
      return b;
    };
    out.c_k.resize(K);
    for (int k = 0; k < K; ++k)
      out.c_k[k] = integrate([&](const Eigen::VectorXd& z) {
        const Eigen::VectorXd x = mix.inverse_warp(z, k);
        const double lq = target.log_q(x);
        return lq == kNegInf ? 0.0 : std::exp(log_std_normal(z) + lq - mix.log_density(x));
      });
    out.c = 0.0;
    for (int k = 0; k < K; ++k) out.c += mix.weight(k) * out.c_k[k];
    out.chi2_k.resize(K);
    for (int k = 0; k < K; ++k)
      out.chi2_k[k] = integrate([&](const Eigen::VectorXd& z) {
        const Eigen::VectorXd x = mix.inverse_warp(z, k);
        const double lq = target.log_q(x);
        const double r = lq == kNegInf ? 0.0 : std::exp(lq - mix.log_density(x));
        const double e = r / out.c_k[k] - 1.0;
        return e * e * std::exp(log_std_normal(z));
      });
    out.chi2_wb = integrate([&](const Eigen::VectorXd& z) {
      const Eigen::VectorXd r = ratios(mix, target, z);
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += mix.weight(k) * r[k];
      const double e = s / out.c - 1.0;
      return e * e * std::exp(log_std_normal(z));
    });
  } else {
    out.method = "monte_carlo";
    const int N = o.mc_draws;
    if (N < 100) throw InputError("need at least 100 Monte Carlo draws");
    CounterRng rng(o.seed);
    Eigen::MatrixXd R(N, K);
    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd z(d);
      for (int t = 0; t < d; ++t) z[t] = rng.normal();
      R.row(i) = ratios(mix, target, z).transpose();
    }
    out.c_k = R.colwise().mean().transpose();
    out.c = 0.0;
    for (int k = 0; k < K; ++k) out.c += mix.weight(k) * out.c_k[k];
    out.chi2_k.resize(K);
    auto check_tail = [&](const Eigen::VectorXd& terms) {
      if (terms.maxCoeff() > 0.1 * terms.sum()) out.divergent = true;
    };
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd e = (R.col(k).array() / out.c_k[k] - 1.0).square();
      out.chi2_k[k] = e.mean();
      check_tail(e);
    }
    const Eigen::VectorXd mixr = R * Eigen::Map<const Eigen::VectorXd>(mix.weights().data(), K);
    const Eigen::VectorXd e = (mixr.array() / out.c - 1.0).square();
    out.chi2_wb = e.mean();
    check_tail(e);
    // Batch means over 20 batches for the headline quantity.
    const int B = 20, per = N / B;
    Eigen::VectorXd bm(B);
    for (int b = 0; b < B; ++b) {
      const Eigen::VectorXd mr = mixr.segment(b * per, per);
      const double cb = mr.mean();
      bm[b] = (mr.array() / cb - 1.0).square().mean();
    }
    out.se_chi2_wb = std::sqrt((bm.array() - bm.mean()).square().sum() / (B - 1) / B);
    out.low_confidence = out.se_chi2_wb > 0.1 * out.chi2_wb;
  }
  finish(out, mix);
  return out;
}

nlohmann::json to_json(const VarianceDiagnostics& d) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"method", d.method},
          {"c", d.c},
          {"c_k", vec(d.c_k)},
          {"w_tilde", vec(d.w_tilde)},
          {"chi2_k", vec(d.chi2_k)},
          {"chi2_wb", d.chi2_wb},
          {"beta", d.beta},
          {"var_wb", d.var_wb},
          {"var_swb", d.var_swb},
          {"term_I", d.term_I},
          {"term_II", d.term_II},
          {"beta_1K", std::isfinite(d.beta_1K) ? nlohmann::json(d.beta_1K) : nlohmann::json(nullptr)},
          {"condition_holds", d.condition_holds},
          {"divergent", d.divergent},
          {"low_confidence", d.low_confidence},
          {"se_chi2_wb", d.se_chi2_wb}};
}

}  // namespace warpu
