#include "warpu/divergence.hpp"

#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace warpu {

namespace {

using boost::math::quadrature::gauss_kronrod;

QuadratureBox widen(const QuadratureBox& box) {
  const Eigen::VectorXd half = 0.5 * (box.upper - box.lower);
  return {box.lower - half, box.upper + half};
}

DivergenceEstimate stable_quadrature(const std::function<double(const Eigen::VectorXd&)>& f,
                                     const QuadratureBox& box) {
  DivergenceEstimate out;
  const double a = integrate_box(f, box);
  const double b = integrate_box(f, widen(box));
  out.value = b;
  if (!std::isfinite(a) || !std::isfinite(b) || std::abs(b - a) > 1e-6 * std::max(1.0, std::abs(b)))
    out.divergent = true;
  return out;
}

double eta1_of(double s1) {
  if (!(s1 > 0.0 && s1 < 1.0)) throw InputError("sampling fraction must be in (0, 1)");
  // eta_i proportional to 1/s_i, normalised: eta1 = s2.
  return 1.0 - s1;
}

// log of [eta1/p1 + eta2/p2]^{-1} = log p1 + log p2 - log(eta1 p2 + eta2 p1).
double log_harmonic(double l1, double l2, double eta1) {
  if (l1 == kNegInf || l2 == kNegInf) return kNegInf;
  return l1 + l2 - log_sum_exp(std::log(eta1) + l2, std::log(1.0 - eta1) + l1);
}

}  // namespace

double integrate_box(const std::function<double(const Eigen::VectorXd&)>& f, const QuadratureBox& box, double tol) {
  const auto d = box.lower.size();
  if (d != box.upper.size() || d < 1 || d > 2) throw InputError("quadrature supports 1 or 2 dimensions");
  if (d == 1) {
    Eigen::VectorXd x(1);
    auto g = [&](double t) {
      x[0] = t;
      return f(x);
    };
    return gauss_kronrod<double, 31>::integrate(g, box.lower[0], box.upper[0], 15, tol);
  }
  auto outer = [&](double t0) {
    auto inner = [&](double t1) {
      Eigen::VectorXd x(2);
      x << t0, t1;
      return f(x);
    };
    return gauss_kronrod<double, 31>::integrate(inner, box.lower[1], box.upper[1], 12, tol);
  };
  return gauss_kronrod<double, 31>::integrate(outer, box.lower[0], box.upper[0], 12, tol);
}

DivergenceEstimate pearson_chi2(const LogDensityFn& log_p1, const LogDensityFn& log_p2, const QuadratureBox& box) {
  auto f = [&](const Eigen::VectorXd& x) {
    const double l1 = log_p1(x);
    const double l2 = log_p2(x);
    if (l1 == kNegInf) return l2 == kNegInf ? 0.0 : std::numeric_limits<double>::infinity();
    const double r = std::exp(l2 - l1) - 1.0;
    return r * r * std::exp(l1);
  };
  return stable_quadrature(f, box);
}

DivergenceEstimate pearson_chi2_mc(const LogDensityFn& log_p1, const LogDensityFn& log_p2,
                                   const Eigen::MatrixXd& draws_p1) {
  const Eigen::Index n = draws_p1.rows();
  if (n < 2) throw InputError("need at least two draws");
  Eigen::VectorXd terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = draws_p1.row(i).transpose();
    const double r = std::exp(log_p2(x) - log_p1(x)) - 1.0;
    terms[i] = r * r;
  }
  DivergenceEstimate out;
  out.value = terms.mean();
  out.se = std::sqrt((terms.array() - out.value).square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
  out.low_confidence = out.se > 0.1 * std::abs(out.value);
  out.divergent = !std::isfinite(out.value) || terms.maxCoeff() > 0.1 * terms.sum();
  return out;
}

DivergenceEstimate harmonic_divergence(const LogDensityFn& log_p1, const LogDensityFn& log_p2, double s1,
                                       const QuadratureBox& box) {
  const double eta1 = eta1_of(s1);
  auto f = [&](const Eigen::VectorXd& x) { return std::exp(log_harmonic(log_p1(x), log_p2(x), eta1)); };
  DivergenceEstimate out = stable_quadrature(f, box);
  out.value = 1.0 - out.value;
  return out;
}

DivergenceEstimate harmonic_divergence_mc(const LogDensityFn& log_p1, const LogDensityFn& log_p2, double s1,
                                          const Eigen::MatrixXd& draws_p1, const Eigen::MatrixXd& draws_p2) {
  const double eta1 = eta1_of(s1);
  const Eigen::Index n1 = draws_p1.rows(), n2 = draws_p2.rows();
  if (n1 < 1 || n2 < 1) throw InputError("need draws from both densities");
  const double lf1 = std::log(static_cast<double>(n1) / static_cast<double>(n1 + n2));
  const double lf2 = std::log(static_cast<double>(n2) / static_cast<double>(n1 + n2));
  Eigen::VectorXd terms(n1 + n2);
  for (Eigen::Index i = 0; i < n1 + n2; ++i) {
    const Eigen::VectorXd x = i < n1 ? Eigen::VectorXd(draws_p1.row(i).transpose())
                                     : Eigen::VectorXd(draws_p2.row(i - n1).transpose());
    const double l1 = log_p1(x), l2 = log_p2(x);
    const double lm = log_sum_exp(lf1 + l1, lf2 + l2);
    terms[i] = std::exp(log_harmonic(l1, l2, eta1) - lm);
  }
  DivergenceEstimate out;
  const double n = static_cast<double>(n1 + n2);
  const double mean = terms.mean();
  out.value = 1.0 - mean;
  out.se = std::sqrt((terms.array() - mean).square().sum() / (n - 1.0) / n);
  out.low_confidence = out.se > 0.1 * std::abs(out.value);
  return out;
}

}  // namespace warpu
