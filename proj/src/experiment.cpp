#include "warpu/experiment.hpp"

#include "warpu/config.hpp"
#include "warpu/errors.hpp"
#include "warpu/metrics.hpp"
#include "warpu/numeric.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace warpu {

namespace {

using nlohmann::json;

const std::set<std::string> kSamplers{"iid", "warpu", "adaptive", "rwm", "pt", "mixture_mh", "variance_augmented"};
const std::set<std::string> kEstimators{"bs", "wb", "swb", "wb_cached", "swb_cached"};

bool is_cached(const std::string& m) { return m == "wb_cached" || m == "swb_cached"; }

// A number broadcast to dim, or an array of length dim.
Eigen::VectorXd vector_field(JsonFields& f, const std::string& key, int dim, std::optional<double> fallback) {
  const json* v = f.child(key);
  if (!v) {
    if (!fallback) f.check(false, key, "required");
    return Eigen::VectorXd::Constant(dim, fallback.value_or(0.0));
  }
  if (v->is_number()) return Eigen::VectorXd::Constant(dim, v->get<double>());
  if (v->is_array() && static_cast<int>(v->size()) == dim) {
    Eigen::VectorXd out(dim);
    for (int i = 0; i < dim; ++i) {
      if (!(*v)[i].is_number()) {
        f.check(false, key, "expected numbers");
        return Eigen::VectorXd::Zero(dim);
      }
      out[i] = (*v)[i].get<double>();
    }
    return out;
  }
  f.check(false, key, "expected a number or an array of length " + std::to_string(dim));
  return Eigen::VectorXd::Zero(dim);
}

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

InitialDensity parse_initial_density(const json& j, int dim, const std::string& path, std::vector<std::string>& problems) {
  JsonFields f(j, path, problems);
  const std::string kind = f.get<std::string>("kind", "uniform");
  InitialDensity out;
  if (kind == "uniform") {
    const Eigen::VectorXd lo = vector_field(f, "lower", dim, std::nullopt);
    const Eigen::VectorXd hi = vector_field(f, "upper", dim, std::nullopt);
    f.check((hi.array() > lo.array()).all(), "upper", "must exceed lower");
    out = InitialDensity::uniform_box(lo, hi);
  } else if (kind == "gaussian") {
    const Eigen::VectorXd m = vector_field(f, "mean", dim, 0.0);
    const Eigen::VectorXd s = vector_field(f, "sd", dim, 1.0);
    f.check((s.array() > 0.0).all(), "sd", "must be positive");
    out = InitialDensity::gaussian(m, s);
  } else {
    f.check(false, "kind", "unknown initial density '" + kind + "'");
  }
  f.finish();
  return out;
}

MixtureSpec parse_mixture_spec(const json& m, const TargetInfo* info, const std::string& path,
                               std::vector<std::string>& problems) {
  JsonFields mf(m, path, problems);
  MixtureSpec ms;
  const int dim = info ? info->target.dim() : 0;
  ms.source = mf.get<std::string>("source", ms.source);
  ms.K = mf.get<int>("K", 0);
  ms.fit_draws = mf.get<int>("fit_draws", ms.fit_draws);
  if (ms.source == "explicit") {
    ms.weights = mf.req<std::vector<double>>("weights");
    const auto means = mf.req<std::vector<std::vector<double>>>("means");
    ms.sds = mf.req<std::vector<double>>("sds");
    for (const auto& mu : means) {
      mf.check(!info || static_cast<int>(mu.size()) == dim, "means", "wrong dimension");
      ms.means.push_back(Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())));
    }
    mf.check(ms.weights.size() == ms.means.size() && ms.sds.size() == ms.means.size() && !ms.means.empty(), "weights",
             "weights, means and sds must have the same nonzero length");
  } else if (ms.source == "truth") {
    mf.check(!info || info->mixture.has_value(), "source", "target is not a Gaussian mixture");
  } else if (ms.source == "fit") {
    mf.check(ms.K >= 0 && ms.fit_draws > 0, "fit_draws", "must be positive");
    mf.check(!info || static_cast<bool>(info->sampler), "source", "fitting needs a target with an exact sampler");
  } else if (ms.source == "file") {
    ms.path = mf.req<std::string>("path");
    if (!ms.path.empty()) {
      std::ifstream is(ms.path);
      if (!is) {
        mf.check(false, "path", "cannot read '" + ms.path + "'");
      } else {
        std::stringstream ss;
        ss << is.rdbuf();
        try {
          ms.loaded = GaussianMixture::parse(ss.str());
          mf.check(!info || ms.loaded->dim() == dim, "path", "mixture dimension differs from the target");
        } catch (const std::exception& e) {
          mf.check(false, "path", e.what());
        }
      }
    }
  } else {
    mf.check(false, "source", "expected truth, fit, explicit or file");
  }
  mf.finish();
  return ms;
}

ExperimentConfig parse_experiment_config(const json& j) {
  std::vector<std::string> problems;
  JsonFields f(j, "config", problems);
  ExperimentConfig c;
  if (const json* t = f.child("target")) c.target = *t;
  else f.check(false, "target", "required");
  int dim = 0;
  std::optional<TargetInfo> info;
  if (!c.target.is_null()) {
    try {
      info = make_target(c.target);
      dim = info->target.dim();
    } catch (const ConfigError& e) {
      problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    } catch (const InputError& e) {
      problems.push_back(std::string("target: ") + e.what());
    }
  }

  c.n1 = f.get<int>("n1", c.n1);
  c.n2 = f.get<int>("n2", c.n2);
  c.T = f.get<int>("T", c.T);
  c.M = f.get<int>("M", c.M);
  c.K = f.get<int>("K", c.K);
  c.sigma = f.get<double>("sigma", c.sigma);
  c.seeds = f.get<std::vector<std::uint64_t>>("seeds", c.seeds);
  c.replicates = f.get<int>("replicates", c.replicates);
  c.output = f.get<std::string>("output", c.output);
  c.record_timing = f.get<bool>("record_timing", c.record_timing);
  c.write_traces = f.get<bool>("write_traces", c.write_traces);
  c.reference_draws = f.get<int>("reference_draws", c.reference_draws);
  c.threads = f.get<int>("threads", c.threads);
  c.min_component_count = f.get<int>("min_component_count", c.min_component_count);
  c.merge_small_components = f.get<bool>("merge_small_components", c.merge_small_components);
  c.budgets = f.get<std::vector<std::uint64_t>>("budgets", {});
  for (const auto& [key, v] : std::vector<std::pair<std::string, double>>{
           {"n1", c.n1}, {"n2", c.n2}, {"T", c.T}, {"M", c.M}, {"K", c.K}, {"replicates", c.replicates},
           {"threads", c.threads}, {"min_component_count", c.min_component_count}})
    f.check(v > 0, key, "must be positive");
  f.check(c.sigma > 0.0, "sigma", "must be positive");
  f.check(c.reference_draws >= 0, "reference_draws", "must be nonnegative");
  f.check(!c.seeds.empty(), "seeds", "must be nonempty");
  f.check(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "seeds",
          "must be distinct");

  const std::string mode = f.get<std::string>("budget_mode", "none");
  if (mode == "none") c.budget_mode = BudgetMode::None;
  else if (mode == "evaluation") c.budget_mode = BudgetMode::EvaluationMatched;
  else if (mode == "iteration") c.budget_mode = BudgetMode::IterationMatched;
  else f.check(false, "budget_mode", "expected none, evaluation or iteration");

  c.estimators = f.get<std::vector<std::string>>("estimators", {});
  for (const auto& e : c.estimators) f.check(kEstimators.count(e) > 0, "estimators", "unknown estimator '" + e + "'");
  f.check(c.estimators.size() < 2 || c.budget_mode != BudgetMode::None, "budget_mode",
          "must be set when comparing estimators");
  if (c.budget_mode == BudgetMode::EvaluationMatched) {
    f.check(!c.budgets.empty(), "budgets", "required in evaluation-matched mode");
    for (auto b : c.budgets) f.check(b > 0, "budgets", "must be positive");
  } else {
    f.check(c.budgets.empty(), "budgets", "only used in evaluation-matched mode");
  }

  // Sampler.
  if (const json* s = f.child("sampler")) {
    const json sampler_obj = s->is_string() ? json{{"name", *s}} : *s;
    JsonFields sf(sampler_obj, "config.sampler", problems);
    SamplerSpec& sp = c.sampler;
    sp.name = sf.get<std::string>("name", sp.name);
    sf.check(kSamplers.count(sp.name) > 0, "name", "unknown sampler '" + sp.name + "'");
    sp.kernel = sf.get<std::string>("kernel", sp.kernel);
    sf.check(sp.kernel == "rwm" || sp.kernel == "hmc", "kernel", "expected rwm or hmc");
    sp.hmc_step = sf.get<double>("hmc_step", sp.hmc_step);
    sp.hmc_steps = sf.get<int>("hmc_steps", sp.hmc_steps);
    sp.levels = sf.get<int>("levels", sp.levels);
    sp.burn_in = sf.get<int>("burn_in", sp.burn_in);
    sp.adaptive_ladder = sf.get<bool>("adaptive_ladder", sp.adaptive_ladder);
    sp.prior_a = sf.get<double>("prior_a", sp.prior_a);
    sp.prior_b = sf.get<double>("prior_b", sp.prior_b);
    sp.inner_steps = sf.get<int>("inner_steps", sp.inner_steps);
    sf.check(sp.levels > 0 && sp.burn_in >= 0 && sp.inner_steps > 0 && sp.hmc_steps > 0 && sp.hmc_step > 0.0,
             "name", "counts and step sizes must be positive");
    if (const json* a = sf.child("anneal")) {
      JsonFields af(*a, "config.sampler.anneal", problems);
      AnnealSchedule sch;
      sch.c0 = af.get<double>("c0", sch.c0);
      sch.ratio = af.get<double>("ratio", sch.ratio);
      af.check(sch.c0 >= 1.0 && sch.ratio > 0.0 && sch.ratio <= 1.0, "c0", "need c0 >= 1 and 0 < ratio <= 1");
      af.finish();
      sp.anneal = sch;
    }
    if (const json* init = sf.child("init"); init && dim > 0)
      sp.init = parse_initial_density(*init, dim, "config.sampler.init", problems);
    if (sf.has("theta0") && dim > 0) sp.theta0 = vector_field(sf, "theta0", dim, std::nullopt);
    sf.finish();
    if (sp.name == "adaptive") sf.check(sp.init.has_value(), "init", "required by the adaptive sampler");
    if (sp.name == "iid") sf.check(!info || static_cast<bool>(info->sampler), "name", "target has no exact sampler");
  }

  // Mixture.
  if (const json* m = f.child("mixture")) {
    c.mixture = parse_mixture_spec(*m, info ? &*info : nullptr, "config.mixture", problems);
  } else if (info && !info->mixture) {
    c.mixture.source = "fit";
  }

  // Sample-size consistency.
  bool any_cached = false;
  int need_n1 = 0;
  for (const auto& e : c.estimators) {
    if (is_cached(e)) {
      any_cached = true;
      continue;
    }
    if (c.budget_mode == BudgetMode::EvaluationMatched) {
      for (auto b : c.budgets) need_n1 = std::max(need_n1, budget_sizes(e, b, c.K).first);
    } else {
      need_n1 = std::max(need_n1, c.n1);
    }
  }
  f.check(need_n1 <= c.T, "T", "must be at least the largest n1 used by an estimator (" + std::to_string(need_n1) + ")");
  if (any_cached) {
    f.check(c.sampler.name == "warpu", "estimators", "cached estimators need the warpu sampler");
    c.sampler.keep_cache = true;
  }
  f.finish();
  throw_if_problems(problems);
  return c;
}

std::pair<int, int> budget_sizes(const std::string& method, std::uint64_t budget, int K) {
  const auto B = static_cast<long long>(budget);
  if (method == "bs") return {static_cast<int>(B / 2), static_cast<int>(B - B / 2)};
  if (method == "wb") {
    const int n = static_cast<int>(B / (2LL * K));
    return {n, n};
  }
  if (method == "swb") {
    const long long n1 = B / 2;
    return {static_cast<int>(n1), static_cast<int>((B - n1) / K)};
  }
  if (method == "wb_cached" || method == "swb_cached") return {0, static_cast<int>(B / K)};
  throw InputError("unknown estimator '" + method + "'");
}

GaussianMixture build_mixture(const MixtureSpec& spec, const TargetInfo& info, int K, CounterRng& rng) {
  if (spec.source == "truth") {
    if (!info.mixture) throw InputError("target is not a Gaussian mixture");
    return *info.mixture;
  }
  if (spec.source == "explicit") return GaussianMixture::isotropic(spec.weights, spec.means, spec.sds);
  if (spec.source == "file") {
    if (!spec.loaded) throw InputError("mixture file was not loaded");
    return *spec.loaded;
  }
  if (!info.sampler) throw InputError("fitting needs a target with an exact sampler");
  const int d = info.target.dim();
  Eigen::MatrixXd x(spec.fit_draws, d);
  for (int i = 0; i < spec.fit_draws; ++i) x.row(i) = info.sampler(rng).transpose();
  EmOptions o;
  o.seed = rng.split(1).key();
  return em_fit(x, spec.K > 0 ? spec.K : K, FitConstraints{}, o).mixture;
}

ReplicateOutput run_replicate(const ExperimentConfig& c, std::uint64_t seed, int r) {
  ReplicateOutput out;
  const CounterRng rep = CounterRng::for_replicate(seed, static_cast<std::uint64_t>(r));
  const TargetInfo info = make_target(c.target);
  const TargetDensity& target = info.target;
  const int d = target.dim();
  const SamplerSpec& sp = c.sampler;

  CounterRng mix_rng = rep.split(2);
  GaussianMixture mix;
  const bool needs_mix = sp.name == "warpu" || sp.name == "mixture_mh" || sp.name == "variance_augmented" ||
                         (sp.name != "adaptive" && !c.estimators.empty());
  if (needs_mix) mix = build_mixture(c.mixture, info, c.K, mix_rng);

  CounterRng init_rng = rep.split(4);
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(d);
  if (sp.theta0) theta0 = *sp.theta0;
  else if (sp.init) theta0 = sp.init->sample(init_rng);

  LocalKernel kernel = sp.kernel == "hmc" ? hmc_kernel(sp.hmc_step, sp.hmc_steps) : random_walk_kernel(c.sigma);
  const std::uint64_t sampler_seed = rep.split(1).key();

  target.reset_count();
  const double t0 = now_ms();
  SamplerTrace& trace = out.trace;
  if (sp.name == "iid") {
    CounterRng g = rep.split(1);
    trace.resize(c.T, d, 0, false);
    for (int t = 0; t < c.T; ++t) {
      trace.samples.row(t) = info.sampler(g).transpose();
      trace.accepted[t] = 1;
      trace.evals[t] = 0;
    }
    trace.log_q.setConstant(std::numeric_limits<double>::quiet_NaN());
  } else if (sp.name == "warpu") {
    ChainState st = make_chain(target, theta0, rep.split(1));
    WarpuRunOptions o;
    o.T = c.T;
    o.keep_cache = sp.keep_cache;
    trace = run_warpu(st, target, mix, kernel, o);
  } else if (sp.name == "adaptive") {
    AdaptiveConfig a;
    a.T = c.T;
    a.M = c.M;
    a.K = c.K;
    a.sigma = c.sigma;
    a.seed = sampler_seed;
    a.init = *sp.init;
    a.anneal = sp.anneal;
    a.kernel = kernel;
    a.theta0 = sp.theta0;
    AdaptiveResult res = run_adaptive_warpu(target, a);
    trace = res.stages.back();
    mix = res.mixtures.back();
  } else if (sp.name == "rwm") {
    trace = run_rwm(target, c.sigma, c.T, theta0, sampler_seed);
  } else if (sp.name == "pt") {
    TemperingConfig tc;
    tc.levels = sp.levels;
    tc.adaptive_ladder = sp.adaptive_ladder;
    tc.T = c.T;
    tc.burn_in = sp.burn_in;
    tc.sigma = c.sigma;
    tc.seed = sampler_seed;
    tc.theta0 = theta0;
    trace = run_parallel_tempering(target, tc).cold;
  } else if (sp.name == "mixture_mh") {
    trace = run_mixture_mh(target, mix, c.T, theta0, sampler_seed);
  } else if (sp.name == "variance_augmented") {
    VarianceAugmentedConfig vc;
    vc.mix.weights = mix.weights();
    for (int k = 0; k < mix.size(); ++k) vc.mix.means.push_back(mix.mean(k));
    vc.mix.a = sp.prior_a;
    vc.mix.b = sp.prior_b;
    vc.sigma = c.sigma;
    vc.T = c.T;
    vc.inner_steps = sp.inner_steps;
    vc.seed = sampler_seed;
    vc.theta0 = theta0;
    trace = run_variance_augmented_warpu(target, vc);
  }
  const double t1 = now_ms();

  SamplerRow& row = out.sampler;
  row.seed = seed;
  row.replicate = r;
  row.target_evals = target.eval_count();
  row.wall_ms = c.record_timing ? t1 - t0 : 0.0;
  std::vector<double> x0(trace.samples.col(0).data(), trace.samples.col(0).data() + trace.size());
  if (trace.size() >= 10) {
    const EssResult e = ess_autocorrelation(x0);
    row.ess = e.ess;
    row.ess_degenerate = e.degenerate;
    const double mean = std::accumulate(x0.begin(), x0.end(), 0.0) / x0.size();
    double c0 = 0.0;
    for (double v : x0) c0 += (v - mean) * (v - mean);
    for (int k = 1; k <= 5; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i + k < x0.size(); ++i) s += (x0[i] - mean) * (x0[i + k] - mean);
      row.acf.push_back(c0 > 0.0 ? s / c0 : 1.0);
    }
  }
  double acc = 0.0;
  for (auto a : trace.accepted) acc += a;
  row.acceptance = trace.size() > 0 ? acc / trace.size() : 0.0;
  if (info.sampler) {
    CounterRng g = rep.split(3);
    const int n = c.reference_draws > 0 ? c.reference_draws : c.T;
    Eigen::MatrixXd ref(n, d);
    for (int i = 0; i < n; ++i) ref.row(i) = info.sampler(g).transpose();
    row.w1 = marginal_wasserstein(trace.samples, ref);
  }
  if (!info.centres.empty()) row.occupancy = mode_occupancy(trace.samples, info.centres);

  // Estimators. The pi-side draws are the last n1 rows of the trace.
  std::vector<std::uint64_t> budgets = c.budgets;
  if (budgets.empty()) budgets.push_back(0);
  for (std::size_t mi = 0; mi < c.estimators.size(); ++mi) {
    const std::string& m = c.estimators[mi];
    for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
      const std::uint64_t B = budgets[bi];
      int n1 = c.n1, n2 = c.n2;
      if (c.budget_mode == BudgetMode::EvaluationMatched) std::tie(n1, n2) = budget_sizes(m, B, mix.size());
      else if (m == "swb" || m == "swb_cached") n2 = std::max(1, c.n2 / mix.size());
      if (is_cached(m)) n1 = trace.size();
      CounterRng er = rep.split(100 + mi * 1000 + bi);
      const Eigen::MatrixXd pi = trace.samples.bottomRows(std::min(n1, trace.size()));
      SwbOptions so;
      so.n2_per_component = n2;
      so.min_component_count = c.min_component_count;
      so.policy = c.merge_small_components ? SmallComponentPolicy::MergeNearest : SmallComponentPolicy::Error;
      target.reset_count();
      const double s0 = now_ms();
      EstimatorReport rp;
      if (m == "bs") {
        Eigen::MatrixXd md(n2, d);
        for (int i = 0; i < n2; ++i) md.row(i) = mix.sample(er).transpose();
        rp = classical_bridge_estimate(target, mix, pi, md);
      } else if (m == "wb") {
        const Eigen::MatrixXd z = standard_normal_draws(n2, d, er);
        rp = warpu_bridge_estimate(target, mix, pi, z, er);
      } else if (m == "swb") {
        rp = stochastic_warpu_bridge(target, mix, pi, so, er);
      } else if (m == "wb_cached") {
        const Eigen::MatrixXd z = standard_normal_draws(n2, d, er);
        rp = warpu_bridge_from_trace(target, mix, trace, z);
      } else {
        rp = stochastic_warpu_bridge_from_trace(target, mix, trace, so, er);
      }
      const double s1 = now_ms();
      EstimateRow er_row;
      er_row.seed = seed;
      er_row.replicate = r;
      er_row.budget = B;
      er_row.method = m;
      er_row.n1 = n1;
      er_row.n2 = n2;
      er_row.c_hat = rp.c_hat;
      er_row.lambda_hat = rp.lambda_hat;
      er_row.target_evals = rp.target_evals;
      er_row.wall_ms = c.record_timing ? s1 - s0 : 0.0;
      out.estimates.push_back(er_row);
    }
  }
  return out;
}

json summarize(const ExperimentConfig& c, const std::vector<ReplicateOutput>& reps, double log_c) {
  json s;
  const double truth = std::exp(log_c);
  s["true_c"] = truth;
  s["true_log_c"] = log_c;
  s["replicates"] = reps.size();

  // Sampler metrics.
  json sm;
  double ess = 0.0, evals = 0.0, wall = 0.0, acc = 0.0;
  Eigen::VectorXd w1, occ;
  for (const auto& r : reps) {
    ess += r.sampler.ess;
    evals += static_cast<double>(r.sampler.target_evals);
    wall += r.sampler.wall_ms;
    acc += r.sampler.acceptance;
    if (r.sampler.w1.size()) w1 = w1.size() ? Eigen::VectorXd(w1 + r.sampler.w1) : r.sampler.w1;
    if (r.sampler.occupancy.size())
      occ = occ.size() ? Eigen::VectorXd(occ + r.sampler.occupancy) : r.sampler.occupancy;
  }
  const double n = static_cast<double>(std::max<std::size_t>(reps.size(), 1));
  sm["name"] = c.sampler.name;
  sm["mean_ess"] = ess / n;
  sm["mean_target_evals"] = evals / n;
  sm["mean_wall_ms"] = wall / n;
  sm["mean_acceptance"] = acc / n;
  if (w1.size()) sm["mean_w1"] = std::vector<double>(w1.data(), w1.data() + w1.size());
  if (occ.size()) {
    occ /= n;
    sm["mean_occupancy"] = std::vector<double>(occ.data(), occ.data() + occ.size());
  }
  s["sampler"] = sm;

  // Estimators, grouped by (budget, method), in config order.
  json est = json::array();
  std::map<std::uint64_t, std::pair<double, double>> spread;  // budget -> (min, max) mean evals
  std::vector<std::uint64_t> budgets = c.budgets;
  if (budgets.empty()) budgets.push_back(0);
  for (std::uint64_t B : budgets) {
    for (const auto& m : c.estimators) {
      std::vector<double> vals;
      double ev = 0.0, wl = 0.0;
      for (const auto& r : reps)
        for (const auto& e : r.estimates)
          if (e.method == m && e.budget == B) {
            vals.push_back(e.c_hat);
            ev += static_cast<double>(e.target_evals);
            wl += e.wall_ms;
          }
      if (vals.empty()) continue;
      const RmseSummary rs = rmse_summary(vals, truth);
      const double mean_evals = ev / vals.size();
      json e{{"method", m},      {"budget", B},        {"rmse", rs.rmse},           {"se_rmse", rs.se},
             {"mean", rs.mean},  {"sd", rs.sd},        {"mean_target_evals", mean_evals},
             {"mean_wall_ms", wl / vals.size()}, {"count", vals.size()}};
      if (rs.rmse > 0.0 && mean_evals > 0.0) e["pps_evals"] = 1.0 / (rs.rmse * mean_evals);
      if (rs.rmse > 0.0 && wl > 0.0) e["pps_wall"] = pps_wall(rs.rmse, wl / vals.size());
      est.push_back(e);
      auto it = spread.find(B);
      if (it == spread.end()) spread[B] = {mean_evals, mean_evals};
      else it->second = {std::min(it->second.first, mean_evals), std::max(it->second.second, mean_evals)};
    }
  }
  s["estimators"] = est;
  if (c.budget_mode == BudgetMode::EvaluationMatched) {
    json bs = json::array();
    for (const auto& [B, mm] : spread)
      bs.push_back({{"budget", B}, {"relative_spread", (mm.second - mm.first) / static_cast<double>(B)}});
    s["budget_spread"] = bs;
  }
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& c, bool write_files) {
  struct Job {
    std::uint64_t seed;
    int r;
  };
  std::vector<Job> jobs;
  for (auto seed : c.seeds)
    for (int r = 0; r < c.replicates; ++r) jobs.push_back({seed, r});

  ExperimentResult res;
  res.replicates.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        res.replicates[i] = run_replicate(c, jobs[i].seed, jobs[i].r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };
  const int nt = std::max(1, std::min<int>(c.threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  res.summary = summarize(c, res.replicates, make_target(c.target).log_c);
  if (!write_files) return res;

  namespace fs = std::filesystem;
  const fs::path dir(c.output);
  fs::create_directories(dir);
  auto open = [](const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
  };
  {
    std::ofstream os = open(dir / "results.csv");
    os << "seed,replicate,budget,method,n1,n2,c_hat,lambda_hat,target_evals,wall_ms\n";
    for (const auto& r : res.replicates)
      for (const auto& e : r.estimates)
        os << e.seed << ',' << e.replicate << ',' << e.budget << ',' << e.method << ',' << e.n1 << ',' << e.n2 << ','
           << format_double(e.c_hat) << ',' << format_double(e.lambda_hat) << ',' << e.target_evals << ','
           << format_double(e.wall_ms) << '\n';
  }
  {
    std::ofstream os = open(dir / "sampler.csv");
    const int d = res.replicates.empty() ? 0 : res.replicates[0].trace.dim();
    const auto n_occ = res.replicates.empty() ? 0 : res.replicates[0].sampler.occupancy.size();
    const auto n_w1 = res.replicates.empty() ? 0 : res.replicates[0].sampler.w1.size();
    (void)d;
    os << "seed,replicate,target_evals,wall_ms,ess,ess_degenerate,acceptance";
    for (int k = 1; k <= 5; ++k) os << ",acf_" << k;
    for (Eigen::Index j = 0; j < n_w1; ++j) os << ",w1_" << j + 1;
    for (Eigen::Index j = 0; j < n_occ; ++j) os << ",occupancy_" << j + 1;
    os << '\n';
    for (const auto& r : res.replicates) {
      const SamplerRow& s = r.sampler;
      os << s.seed << ',' << s.replicate << ',' << s.target_evals << ',' << format_double(s.wall_ms) << ','
         << format_double(s.ess) << ',' << (s.ess_degenerate ? 1 : 0) << ',' << format_double(s.acceptance);
      for (int k = 0; k < 5; ++k) os << ',' << (k < static_cast<int>(s.acf.size()) ? format_double(s.acf[k]) : "");
      for (Eigen::Index j = 0; j < s.w1.size(); ++j) os << ',' << format_double(s.w1[j]);
      for (Eigen::Index j = 0; j < s.occupancy.size(); ++j) os << ',' << format_double(s.occupancy[j]);
      os << '\n';
    }
  }
  if (c.write_traces) {
    fs::create_directories(dir / "traces");
    for (const auto& r : res.replicates) {
      std::ofstream os = open(dir / "traces" /
                              ("trace_s" + std::to_string(r.sampler.seed) + "_r" + std::to_string(r.sampler.replicate) +
                               ".csv"));
      write_trace_csv(r.trace, os);
    }
  }
  {
    std::ofstream os = open(dir / "summary.json");
    os << res.summary.dump(2) << '\n';
  }
  return res;
}

}  // namespace warpu
