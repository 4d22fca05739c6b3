#pragma once

#include "warpu/mixture.hpp"
#include "warpu/mixture_fit.hpp"
#include "warpu/rng.hpp"
#include "warpu/target.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace warpu {

struct ChainState {
  Eigen::VectorXd theta;
  double log_q = 0.0;  // log q(theta), always current
  CounterRng rng;
  int stage = 0;
  std::uint64_t steps = 0;
  std::uint64_t accepted = 0;
  std::uint64_t mode_jumps = 0;  // psi' != psi
  std::uint64_t warp_skipped = 0;  // degenerate nu, warp not applied
};

// One evaluation for log q(theta0).
ChainState make_chain(const TargetDensity& target, const Eigen::VectorXd& theta0, CounterRng rng);

// Any pi-reversible move on the chain. Returns whether a proposal was accepted.
using LocalKernel = std::function<bool(ChainState&, const TargetDensity&)>;

bool rwm_step(ChainState& state, const TargetDensity& target, double sigma);

struct LeapfrogResult {
  Eigen::VectorXd theta;
  Eigen::VectorXd momentum;
  double log_q = 0.0;
  bool finite = true;
};
LeapfrogResult leapfrog(const TargetDensity& target, Eigen::VectorXd theta, Eigen::VectorXd momentum,
                        double step_size, int n_steps);

struct HmcOutcome {
  bool accepted = false;
  bool divergent = false;  // non-finite trajectory or energy error above 1000
  double energy_error = 0.0;
};
HmcOutcome hmc_step(ChainState& state, const TargetDensity& target, double step_size, int n_steps);

LocalKernel random_walk_kernel(double sigma);
LocalKernel hmc_kernel(double step_size, int n_steps);
// No local move at all; warp moves alone (used for the lattice example).
LocalKernel identity_kernel();

struct WarpStep {
  bool accepted = false;
  int psi = -1;
  int psi_prime = -1;
  bool warp_skipped = false;
  std::uint64_t evals = 0;
  Eigen::VectorXd theta_mh;  // state after the local kernel
  Eigen::VectorXd theta_star;
  Eigen::VectorXd log_q_back;  // log q(H_k(theta_star)), k = 1..K
  SimplexVector nu;
};

// Local move, then psi ~ varpi(.|theta), theta* = F_psi(theta),
// psi' ~ nu(.|theta*) (raised to 1/anneal), theta = H_psi'(theta*).
WarpStep warpu_step(ChainState& state, const TargetDensity& target, const GaussianMixture& mix,
                    const LocalKernel& kernel, double anneal = 1.0);

// Draws and per-step metadata. psi fields are 0-based, -1 when unused.
struct SamplerTrace {
  Eigen::MatrixXd samples;  // T x d
  Eigen::VectorXd log_q;  // log q of each retained sample
  std::vector<std::uint8_t> accepted;
  std::vector<int> psi;
  std::vector<int> psi_prime;
  std::vector<std::uint64_t> evals;
  // Optional warp caches, filled when requested.
  Eigen::MatrixXd theta_star;  // T x d
  Eigen::MatrixXd log_q_back;  // T x K
  // Sampler specific extras, e.g. drawn variances.
  Eigen::MatrixXd aux;

  int size() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
  bool has_cache() const { return theta_star.rows() == samples.rows() && samples.rows() > 0; }
  std::uint64_t total_evals() const;

  void resize(int T, int d, int K, bool cache, int aux_cols = 0);
  void record(int t, const ChainState& state, bool acc, int psi_, int psi_prime_, std::uint64_t ev);
};

void write_trace_csv(const SamplerTrace& trace, std::ostream& os);
SamplerTrace read_trace_csv(std::istream& is);

struct WarpuRunOptions {
  int T = 1000;
  double anneal = 1.0;
  bool keep_cache = false;
};

SamplerTrace run_warpu(ChainState& state, const TargetDensity& target, const GaussianMixture& mix,
                       const LocalKernel& kernel, const WarpuRunOptions& options);

SamplerTrace run_basic_warpu(const TargetDensity& target, const GaussianMixture& mix, double sigma, int T,
                             const Eigen::VectorXd& theta0, std::uint64_t seed, bool keep_cache = false);

// Plain random-walk Metropolis, for baselines.
SamplerTrace run_rwm(const TargetDensity& target, double sigma, int T, const Eigen::VectorXd& theta0,
                     std::uint64_t seed);

// Independence Metropolis-Hastings with phi_mix as proposal.
SamplerTrace run_mixture_mh(const TargetDensity& target, const GaussianMixture& mix, int T,
                            const Eigen::VectorXd& theta0, std::uint64_t seed);

// ---- adaptive sampler ----

struct InitialDensity {
  enum class Kind { UniformBox, Gaussian };
  Kind kind = Kind::UniformBox;
  Eigen::VectorXd a;  // lower corner or mean
  Eigen::VectorXd b;  // upper corner or standard deviations

  static InitialDensity uniform_box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static InitialDensity gaussian(Eigen::VectorXd mean, Eigen::VectorXd sd);
  Eigen::VectorXd sample(CounterRng& rng) const;
  int dim() const { return static_cast<int>(a.size()); }
};

// Which samples feed each refit: all accumulated ones or a size-T
// subsample, optionally with refitting switched off after a given stage.
enum class RefitPolicy { AllSamples, AllSamplesEarlyStop, Subsample, SubsampleEarlyStop };

// C^{(s)} = max(1, c0 * ratio^s).
struct AnnealSchedule {
  double c0 = 8.0;
  double ratio = 0.5;
  double at(int s) const;
};

struct AdaptiveConfig {
  int T = 4000;
  int M = 11;
  int K = 10;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  InitialDensity init;
  RefitPolicy policy = RefitPolicy::AllSamples;
  int early_stop_stage = 10;  // refits stop after this stage under the *EarlyStop policies
  FitConstraints constraints;
  int em_max_iter = 500;
  double em_rel_tol = 1e-8;
  std::optional<AnnealSchedule> anneal;
  std::function<double(int)> schedule;  // refit probability; defaults to update_schedule
  std::optional<Eigen::VectorXd> theta0;  // defaults to the last initial draw
  LocalKernel kernel;  // defaults to a random walk with sigma
  bool keep_cache = false;
  bool warm_refit = false;  // start each refit from the previous mixture instead of k-means++
};

struct AdaptiveResult {
  Eigen::MatrixXd initial;  // stage-0 draws, T x d
  std::vector<SamplerTrace> stages;  // stages[s-1] holds stage s
  std::vector<GaussianMixture> mixtures;  // mixtures[s] is phi^{(s)}
  std::vector<bool> refit;  // refit[s-1]: was phi^{(s)} refitted
  std::uint64_t init_evals = 0;  // evaluations spent outside the stage loops
  ChainState final_state;
};

AdaptiveResult run_adaptive_warpu(const TargetDensity& target, const AdaptiveConfig& config);

// ---- parallel tempering ----

struct TemperingConfig {
  int levels = 20;
  std::vector<double> betas;  // explicit ladder; empty means equally spaced
  bool adaptive_ladder = false;  // Robbins-Monro on log spacings
  double target_swap_rate = 0.234;
  int T = 1000;  // retained iterations
  int burn_in = 0;  // discarded iterations; ladder adapts only here
  double sigma = 1.0;  // cold-level random walk scale, level i uses sigma/sqrt(beta_i)
  std::uint64_t seed = 0;
  Eigen::VectorXd theta0;
};

struct TemperingResult {
  SamplerTrace cold;
  std::vector<double> betas;
  Eigen::VectorXd swap_rates;  // per adjacent pair over retained iterations
};

// Equally spaced inverse temperatures 1, (n-1)/n, ..., 1/n.
std::vector<double> equally_spaced_ladder(int levels);

TemperingResult run_parallel_tempering(const TargetDensity& target, const TemperingConfig& config);

// ---- variance-augmented warp ----

// Each component carries its own variance per coordinate group, with an
// inverse-gamma(a, b) prior; phi_mix,2 is the resulting scale mixture.
struct VarianceAugmentedMixture {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<std::vector<int>> groups;  // partition of coordinates; empty means one group
  double a = 2.25;
  double b = 1.25;
  bool point_mass = false;  // prior collapsed at sigma^2 = 1

  int size() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  std::vector<std::vector<int>> group_list() const;
  double log_component(int k, const Eigen::VectorXd& theta) const;  // weight included
  double log_density(const Eigen::VectorXd& theta) const;
};

struct VarianceAugmentedConfig {
  VarianceAugmentedMixture mix;
  double sigma = 1.0;
  int T = 1000;
  int inner_steps = 20;
  std::uint64_t seed = 0;
  Eigen::VectorXd theta0;
};

struct VarianceAugmentedStep {
  bool accepted = false;
  int psi = -1;
  int psi_prime = -1;
  Eigen::VectorXd sigma2;  // per group, after the inverse map
  std::uint64_t evals = 0;
};

VarianceAugmentedStep variance_augmented_step(ChainState& state, const TargetDensity& target,
                                              const VarianceAugmentedMixture& mix, double sigma, int inner_steps);

// aux columns hold the drawn per-group variances.
SamplerTrace run_variance_augmented_warpu(const TargetDensity& target, const VarianceAugmentedConfig& config);

}  // namespace warpu
