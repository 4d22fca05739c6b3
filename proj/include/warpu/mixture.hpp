#pragma once

#include "warpu/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace warpu {

// Probabilities over K components, nonnegative and summing to one.
using SimplexVector = Eigen::VectorXd;

// phi_mix(theta) = sum_k w_k |S_k|^{-1} phi(S_k^{-1}(theta - mu_k)), S_k lower
// triangular with positive diagonal.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                  std::vector<Eigen::MatrixXd> scales);

  // Spherical components with scalar standard deviations.
  static GaussianMixture isotropic(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                   const std::vector<double>& sds);
  // Components parameterised by covariance, factored here.
  static GaussianMixture from_covariances(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                          const std::vector<Eigen::MatrixXd>& covs);

  int size() const { return static_cast<int>(weights_.size()); }
  int dim() const { return means_.empty() ? 0 : static_cast<int>(means_[0].size()); }

  double weight(int k) const { return weights_[k]; }
  const std::vector<double>& weights() const { return weights_; }
  const Eigen::VectorXd& mean(int k) const { return means_[k]; }
  const Eigen::MatrixXd& scale(int k) const { return scales_[k]; }
  double log_det(int k) const { return log_dets_[k]; }
  Eigen::MatrixXd covariance(int k) const { return scales_[k] * scales_[k].transpose(); }

  // log phi^{(k)}(theta), weight included.
  double log_component(int k, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd log_components(const Eigen::VectorXd& theta) const;
  double log_density(const Eigen::VectorXd& theta) const;
  SimplexVector responsibilities(const Eigen::VectorXd& theta) const;

  // F_k(theta) = S_k^{-1}(theta - mu_k) and its inverse H_k.
  Eigen::VectorXd forward_warp(const Eigen::VectorXd& theta, int k) const;
  Eigen::VectorXd inverse_warp(const Eigen::VectorXd& theta_star, int k) const;

  Eigen::VectorXd sample(CounterRng& rng) const;

  std::string serialize() const;
  static GaussianMixture parse(std::string_view text);

  bool operator==(const GaussianMixture& o) const;

 private:
  void check_dim(const Eigen::VectorXd& theta) const;

  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> scales_;
  std::vector<double> log_dets_;
};

// Solve L x = b for lower-triangular L; throws NumericError on a zero pivot.
Eigen::VectorXd solve_lower(const Eigen::MatrixXd& L, const Eigen::VectorXd& b);

bool is_simplex(const Eigen::VectorXd& p, double tol = 1e-12);

}  // namespace warpu
