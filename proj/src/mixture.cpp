#include "warpu/mixture.hpp"

#include "warpu/errors.hpp"
#include "warpu/numeric.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace warpu {

namespace {

void put(std::string& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double take(std::istringstream& in) {
  std::string tok;
  if (!(in >> tok)) throw InputError("mixture text: unexpected end of input");
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw InputError("mixture text: bad number '" + tok + "'");
  return v;
}

void expect(std::istringstream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) throw InputError("mixture text: expected '" + word + "'");
}

}  // namespace

Eigen::VectorXd solve_lower(const Eigen::MatrixXd& L, const Eigen::VectorXd& b) {
  const Eigen::Index d = b.size();
  Eigen::VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double s = b[i];
    for (Eigen::Index j = 0; j < i; ++j) s -= L(i, j) * x[j];
    if (L(i, i) == 0.0 || !std::isfinite(L(i, i))) throw NumericError("singular triangular factor");
    x[i] = s / L(i, i);
  }
  return x;
}

bool is_simplex(const Eigen::VectorXd& p, double tol) {
  if (p.size() == 0) return false;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!(p[i] >= 0.0)) return false;
  return std::abs(p.sum() - 1.0) <= tol;
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> scales)
    : weights_(std::move(weights)), means_(std::move(means)), scales_(std::move(scales)) {
  const std::size_t K = weights_.size();
  if (K == 0) throw InputError("mixture needs at least one component");
  if (means_.size() != K || scales_.size() != K) throw InputError("mixture: weights, means, scales differ in length");
  const Eigen::Index d = means_[0].size();
  if (d == 0) throw InputError("mixture: zero dimension");
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (!(weights_[k] >= 0.0) || !std::isfinite(weights_[k])) throw InputError("mixture: negative weight");
    total += weights_[k];
    if (means_[k].size() != d) throw InputError("mixture: mean dimension mismatch");
    if (!means_[k].allFinite()) throw InputError("mixture: non-finite mean");
    const auto& S = scales_[k];
    if (S.rows() != d || S.cols() != d) throw InputError("mixture: scale dimension mismatch");
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(S(i, i) > 0.0) || !std::isfinite(S(i, i))) throw InputError("mixture: scale diagonal must be positive");
      for (Eigen::Index j = i + 1; j < d; ++j)
        if (S(i, j) != 0.0) throw InputError("mixture: scale must be lower triangular");
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("mixture: weights must sum to one");
  log_weights_.resize(K);
  log_dets_.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    log_weights_[k] = weights_[k] > 0.0 ? std::log(weights_[k]) : kNegInf;
    double ld = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) ld += std::log(scales_[k](i, i));
    log_dets_[k] = ld;
  }
}

GaussianMixture GaussianMixture::isotropic(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                           const std::vector<double>& sds) {
  if (sds.size() != means.size()) throw InputError("mixture: sds length mismatch");
  std::vector<Eigen::MatrixXd> scales;
  for (std::size_t k = 0; k < means.size(); ++k) {
    const auto d = means[k].size();
    scales.push_back(sds[k] * Eigen::MatrixXd::Identity(d, d));
  }
  return GaussianMixture(std::move(weights), std::move(means), std::move(scales));
}

GaussianMixture GaussianMixture::from_covariances(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                                  const std::vector<Eigen::MatrixXd>& covs) {
  std::vector<Eigen::MatrixXd> scales;
  for (const auto& C : covs) {
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success) throw NumericError("mixture: covariance not positive definite");
    scales.push_back(llt.matrixL());
  }
  return GaussianMixture(std::move(weights), std::move(means), std::move(scales));
}

void GaussianMixture::check_dim(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim()) throw InputError("mixture: dimension mismatch");
}

double GaussianMixture::log_component(int k, const Eigen::VectorXd& theta) const {
  check_dim(theta);
  if (log_weights_[k] == kNegInf) return kNegInf;
  const Eigen::VectorXd z = solve_lower(scales_[k], theta - means_[k]);
  return log_weights_[k] - log_dets_[k] + log_std_normal(z);
}

Eigen::VectorXd GaussianMixture::log_components(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out(size());
  for (int k = 0; k < size(); ++k) out[k] = log_component(k, theta);
  return out;
}

double GaussianMixture::log_density(const Eigen::VectorXd& theta) const { return log_sum_exp(log_components(theta)); }

SimplexVector GaussianMixture::responsibilities(const Eigen::VectorXd& theta) const {
  SimplexVector p;
  normalize_log_weights(log_components(theta), p);
  return p;
}

Eigen::VectorXd GaussianMixture::forward_warp(const Eigen::VectorXd& theta, int k) const {
  check_dim(theta);
  return solve_lower(scales_[k], theta - means_[k]);
}

Eigen::VectorXd GaussianMixture::inverse_warp(const Eigen::VectorXd& theta_star, int k) const {
  check_dim(theta_star);
  return scales_[k].triangularView<Eigen::Lower>() * theta_star + means_[k];
}

Eigen::VectorXd GaussianMixture::sample(CounterRng& rng) const {
  const Eigen::Map<const Eigen::VectorXd> w(weights_.data(), size());
  const int k = draw_index(w, rng.uniform());
  Eigen::VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = rng.normal();
  return inverse_warp(z, k);
}

std::string GaussianMixture::serialize() const {
  std::string out = "warpu-mixture 1\n";
  out += "components " + std::to_string(size()) + "\n";
  out += "dim " + std::to_string(dim()) + "\n";
  for (int k = 0; k < size(); ++k) {
    out += "weight ";
    put(out, weights_[k]);
    out += "\nmean";
    for (int i = 0; i < dim(); ++i) {
      out += ' ';
      put(out, means_[k][i]);
    }
    out += "\nscale";
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) {
        out += ' ';
        put(out, scales_[k](i, j));
      }
    out += '\n';
  }
  return out;
}

GaussianMixture GaussianMixture::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  expect(in, "warpu-mixture");
  expect(in, "1");
  expect(in, "components");
  const int K = static_cast<int>(take(in));
  expect(in, "dim");
  const int d = static_cast<int>(take(in));
  if (K < 1 || d < 1) throw InputError("mixture text: bad sizes");
  std::vector<double> w(K);
  std::vector<Eigen::VectorXd> mu(K, Eigen::VectorXd(d));
  std::vector<Eigen::MatrixXd> S(K, Eigen::MatrixXd(d, d));
  for (int k = 0; k < K; ++k) {
    expect(in, "weight");
    w[k] = take(in);
    expect(in, "mean");
    for (int i = 0; i < d; ++i) mu[k][i] = take(in);
    expect(in, "scale");
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) S[k](i, j) = take(in);
  }
  return GaussianMixture(std::move(w), std::move(mu), std::move(S));
}

bool GaussianMixture::operator==(const GaussianMixture& o) const {
  if (size() != o.size() || dim() != o.dim()) return false;
  for (int k = 0; k < size(); ++k)
    if (weights_[k] != o.weights_[k] || means_[k] != o.means_[k] || scales_[k] != o.scales_[k]) return false;
  return true;
}

}  // namespace warpu
