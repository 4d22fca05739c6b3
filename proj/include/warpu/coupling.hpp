#pragma once

#include "warpu/mixture.hpp"
#include "warpu/rng.hpp"
#include "warpu/samplers.hpp"
#include "warpu/target.hpp"
#include "warpu/transport.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace warpu {

struct CoupledDraw {
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
  bool same = false;
};

// Maximal coupling of N(m1, s^2 I) and N(m2, s^2 I) by rejection.
CoupledDraw maximal_coupling_draw(const Eigen::VectorXd& m1, const Eigen::VectorXd& m2, double sigma,
                                  CounterRng& rng);

// Reflection-maximal coupling of the same pair.
CoupledDraw reflection_coupling_draw(const Eigen::VectorXd& m1, const Eigen::VectorXd& m2, double sigma,
                                     CounterRng& rng);

enum class ProposalCoupling { Maximal, Reflection };

struct CoupledOptions {
  double sigma = 1.0;
  ProposalCoupling proposal = ProposalCoupling::Maximal;
  bool combined = false;  // one OT over the K^2 (psi, psi') outcomes
  // HMC local move with common momenta; a coupled random-walk step is used
  // with probability hmc_rwm_prob so the chains can meet exactly.
  bool hmc = false;
  double hmc_step = 0.1;
  int hmc_steps = 10;
  double hmc_rwm_prob = 0.2;
};

// What one chain did in one step; enough to Rao-Blackwellise.
struct ChainStepRecord {
  bool has_step = false;
  bool warp_skipped = false;
  Eigen::VectorXd theta_mh;
  Eigen::VectorXd theta_star;
  int psi = -1;
  int psi_prime = -1;
  SimplexVector nu;  // nu(.|theta*), unannealed
  // Combined variant only: the full K x K outcome table and final states.
  Eigen::MatrixXd outcome_probs;
  std::vector<Eigen::VectorXd> outcome_states;
};

struct CoupledStep {
  ChainStepRecord first;
  ChainStepRecord second;
  bool met = false;
};

// One joint transition of (chain1, chain2). Each chain marginally follows
// warpu_step. If the chains already coincide, a single update is copied.
CoupledStep coupled_warpu_step(ChainState& c1, ChainState& c2, const TargetDensity& target,
                               const GaussianMixture& mix, const CoupledOptions& options, CounterRng& shared);

ChainStepRecord record_of(const WarpStep& w);

// Rao-Blackwellised test function. Level 0: h(theta). Level 1: average over
// nu(.|theta*). Level 2: average over both indices given theta_mh (K^2
// evaluations unless the combined table is present).
double rao_blackwell_h(int level, const Eigen::VectorXd& theta, const ChainStepRecord& rec,
                       const GaussianMixture& mix, const TargetDensity& target,
                       const std::function<double(const Eigen::VectorXd&)>& h);

// H_j = h1[j] + sum_{t=j+1}^{tau-1} (h1[t] - h2[t-1]).
double unbiased_H(const std::vector<double>& h1, const std::vector<double>& h2, int tau, int j);
// Average of H_j over j = l..m, in closed form.
double unbiased_H_lm(const std::vector<double>& h1, const std::vector<double>& h2, int tau, int l, int m);

struct CoupledRunConfig {
  CoupledOptions step;
  int l = 0;
  int m = 0;
  int max_iter = 100000;
  std::uint64_t seed = 0;
  InitialDensity init;
  std::vector<std::function<double(const Eigen::VectorXd&)>> h;
  std::vector<int> levels{0};
};

struct CoupledRun {
  int tau = -1;  // -1 when the chains did not meet within max_iter
  bool faithful = true;  // chains stayed equal at every step after tau
  // values[level_index][h_index] per chain, indexed by time.
  std::vector<std::vector<std::vector<double>>> h1;
  std::vector<std::vector<std::vector<double>>> h2;
  std::uint64_t evals = 0;
  double wall_ms = 0.0;
};

CoupledRun run_coupled_chains(const TargetDensity& target, const GaussianMixture& mix, const CoupledRunConfig& config);

struct CoupledRecord {
  int replicate = 0;
  int tau = 0;
  int h = 0;
  int level = 0;
  double H_lm = 0.0;
  double wall_ms = 0.0;
};

void write_coupled_csv(const std::vector<CoupledRecord>& records, std::ostream& os);

// Survival S(t) = P(tau > t) on t = 0..max tau, and the least-squares slope
// of log S(t) over the range where 0.01 <= S(t) < 1.
struct SurvivalSummary {
  std::vector<double> survival;
  double log_slope = 0.0;
  double median = 0.0;
};
SurvivalSummary meeting_time_survival(const std::vector<int>& taus);

}  // namespace warpu
