#pragma once

#include "warpu/mixture.hpp"
#include "warpu/rng.hpp"
#include "warpu/samplers.hpp"
#include "warpu/target.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace warpu {

// Optimal bridge iteration for r = c1/c2 from log q1, log q2 evaluated on
// draws of p1 (set 1) and of p2 (set 2). Starts from the mean log ratio over
// both sets and stops once |delta log r| < tol.
struct BridgeResult {
  double log_r = 0.0;
  double r = 0.0;
  int iterations = 0;
  double se_log = 0.0;  // delta-method plug-in assuming independent draws
};

BridgeResult iterative_bridge(const Eigen::VectorXd& l1_on_1, const Eigen::VectorXd& l2_on_1,
                              const Eigen::VectorXd& l1_on_2, const Eigen::VectorXd& l2_on_2, double tol = 1e-10,
                              int max_iter = 200);

struct ComponentEstimate {
  std::vector<int> components;  // more than one when small strata were merged
  double weight = 0.0;
  double c_hat = 0.0;
  int n1 = 0;
  int n2 = 0;
  int iterations = 0;
};

struct EstimatorReport {
  std::string method;
  double c_hat = 0.0;
  double lambda_hat = 0.0;  // log c_hat
  int iterations = 0;
  std::vector<ComponentEstimate> per_component;
  std::uint64_t target_evals = 0;
  double se_hat = 0.0;  // on the c scale
};

nlohmann::json to_json(const EstimatorReport& r);

// Classical bridge between q and phi_mix. n1 + n2 evaluations.
EstimatorReport classical_bridge_estimate(const TargetDensity& target, const GaussianMixture& mix,
                                          const Eigen::MatrixXd& pi_samples, const Eigen::MatrixXd& mix_samples);

// Warp-U bridge: warp each pi draw with psi ~ varpi, then bridge q_tilde
// against phi. K(n1 + n2) evaluations.
EstimatorReport warpu_bridge_estimate(const TargetDensity& target, const GaussianMixture& mix,
                                      const Eigen::MatrixXd& pi_samples, const Eigen::MatrixXd& phi_samples,
                                      CounterRng& rng);

// Same estimator reusing a Warp-U trace's theta* and cached q values;
// only the phi side costs evaluations (K n2).
EstimatorReport warpu_bridge_from_trace(const TargetDensity& target, const GaussianMixture& mix,
                                        const SamplerTrace& trace, const Eigen::MatrixXd& phi_samples);

enum class SmallComponentPolicy { Error, MergeNearest };

struct SwbOptions {
  int n2_per_component = 1000;
  int min_component_count = 1;
  SmallComponentPolicy policy = SmallComponentPolicy::Error;
};

// Stochastic Warp-U bridge: one bridge per component, combined with the
// mixture weights. n1 + K n2 evaluations.
EstimatorReport stochastic_warpu_bridge(const TargetDensity& target, const GaussianMixture& mix,
                                        const Eigen::MatrixXd& pi_samples, const SwbOptions& options,
                                        CounterRng& rng);

// From a cached trace: K n2 evaluations.
EstimatorReport stochastic_warpu_bridge_from_trace(const TargetDensity& target, const GaussianMixture& mix,
                                                   const SamplerTrace& trace, const SwbOptions& options,
                                                   CounterRng& rng);

Eigen::MatrixXd standard_normal_draws(int n, int d, CounterRng& rng);

// ---- asymptotic variance diagnostics ----

struct DiagnosticsOptions {
  enum class Method { Auto, Quadrature, MonteCarlo };
  Method method = Method::Auto;  // Auto: quadrature for d <= 2
  int mc_draws = 200000;
  std::uint64_t seed = 0;
  double half_width = 10.0;  // quadrature box [-h, h]^d in theta* space
};

struct VarianceDiagnostics {
  std::string method;
  Eigen::VectorXd c_k;  // int q_tilde_k
  double c = 0.0;
  Eigen::VectorXd w_tilde;  // w_k c_k / c
  Eigen::VectorXd chi2_k;  // chi2_P(phi, p_tilde_k)
  double chi2_wb = 0.0;  // chi2_P(phi, pi_tilde)
  double beta = 1.0;  // n2 / n1
  double var_wb = 0.0;  // limit of (n1 + n2) Var(lambda_hat_WB)
  double var_swb = 0.0;  // same for SWB
  double term_I = 0.0;
  double term_II = 0.0;
  double beta_1K = 0.0;
  bool condition_holds = false;  // term_I >= beta_1K * term_II
  bool divergent = false;
  bool low_confidence = false;
  double se_chi2_wb = 0.0;  // MC only
};

VarianceDiagnostics asymptotic_variance_diagnostics(const GaussianMixture& mix, const TargetDensity& target, int n1,
                                                    int n2, const DiagnosticsOptions& options = {});

nlohmann::json to_json(const VarianceDiagnostics& d);

// Lower bound on the ratio of precision per second, SWB over WB, when
// per-evaluation cost dominates.
double predicted_pps_ratio(double beta, int K);

}  // namespace warpu
