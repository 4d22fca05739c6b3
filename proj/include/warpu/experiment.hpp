#pragma once

#include "warpu/coupling.hpp"
#include "warpu/estimators.hpp"
#include "warpu/mixture.hpp"
#include "warpu/samplers.hpp"
#include "warpu/targets.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace warpu {

enum class BudgetMode { None, EvaluationMatched, IterationMatched };

// Where phi_mix comes from: the target's own mixture, an EM fit on exact
// draws, an explicit isotropic mixture, or a file written by `warpu fit`.
struct MixtureSpec {
  std::string source = "truth";  // truth | fit | explicit | file
  int K = 0;  // fit only; 0 means the experiment's K
  int fit_draws = 2000;
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<double> sds;
  std::string path;  // file only
  std::optional<GaussianMixture> loaded;
};

// Reads a mixture block; info may be null when the target failed to parse.
MixtureSpec parse_mixture_spec(const nlohmann::json& j, const TargetInfo* info, const std::string& path,
                               std::vector<std::string>& problems);

struct SamplerSpec {
  std::string name = "iid";  // iid | warpu | adaptive | rwm | pt | mixture_mh | variance_augmented
  std::string kernel = "rwm";  // rwm | hmc
  double hmc_step = 0.1;
  int hmc_steps = 10;
  std::optional<InitialDensity> init;
  std::optional<Eigen::VectorXd> theta0;
  int levels = 20;  // pt
  int burn_in = 0;
  bool adaptive_ladder = false;
  std::optional<AnnealSchedule> anneal;  // adaptive
  bool keep_cache = false;
  double prior_a = 2.25;  // variance_augmented
  double prior_b = 1.25;
  int inner_steps = 20;
};

struct ExperimentConfig {
  nlohmann::json target;
  SamplerSpec sampler;
  std::vector<std::string> estimators;  // bs | wb | swb | wb_cached | swb_cached
  MixtureSpec mixture;
  int n1 = 1000;
  int n2 = 1000;
  int T = 1000;
  int M = 11;
  int K = 5;
  double sigma = 1.0;
  std::vector<std::uint64_t> seeds{0};
  int replicates = 1;
  std::string output = "out";
  BudgetMode budget_mode = BudgetMode::None;
  std::vector<std::uint64_t> budgets;  // evaluation-matched only
  int min_component_count = 1;
  bool merge_small_components = false;
  bool record_timing = false;
  bool write_traces = true;
  int reference_draws = 0;  // exact draws for W1; 0 means T
  int threads = 1;
};

// Validates everything and reports every problem at once through ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

InitialDensity parse_initial_density(const nlohmann::json& j, int dim, const std::string& path,
                                     std::vector<std::string>& problems);

struct EstimateRow {
  std::uint64_t seed = 0;
  int replicate = 0;
  std::uint64_t budget = 0;
  std::string method;
  int n1 = 0;
  int n2 = 0;
  double c_hat = 0.0;
  double lambda_hat = 0.0;
  std::uint64_t target_evals = 0;
  double wall_ms = 0.0;
};

struct SamplerRow {
  std::uint64_t seed = 0;
  int replicate = 0;
  std::uint64_t target_evals = 0;
  double wall_ms = 0.0;
  double ess = 0.0;
  bool ess_degenerate = false;
  std::vector<double> acf;  // lags 1..5 of the first coordinate
  Eigen::VectorXd w1;  // per marginal, empty without exact draws
  Eigen::VectorXd occupancy;
  double acceptance = 0.0;
};

struct ReplicateOutput {
  SamplerRow sampler;
  std::vector<EstimateRow> estimates;
  SamplerTrace trace;
};

// One replicate, fully determined by (config, seed, r).
ReplicateOutput run_replicate(const ExperimentConfig& config, std::uint64_t seed, int r);

struct ExperimentResult {
  std::vector<ReplicateOutput> replicates;  // ordered by seed, then replicate
  nlohmann::json summary;
};

// Runs every replicate, writes results.csv, sampler.csv, summary.json (and
// traces/ when asked) under config.output.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files = true);

// Aggregates recomputed from rows only.
nlohmann::json summarize(const ExperimentConfig& config, const std::vector<ReplicateOutput>& reps, double log_c);

// Sample sizes that spend `budget` evaluations on a method.
std::pair<int, int> budget_sizes(const std::string& method, std::uint64_t budget, int K);

GaussianMixture build_mixture(const MixtureSpec& spec, const TargetInfo& info, int K, CounterRng& rng);

}  // namespace warpu
