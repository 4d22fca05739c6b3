// warpu: command line front end for the sampler, estimator and benchmark code.
// Every subcommand reads a JSON config; see README.md for the fields.

#include "warpu/config.hpp"
#include "warpu/coupling.hpp"
#include "warpu/errors.hpp"
#include "warpu/estimators.hpp"
#include "warpu/experiment.hpp"
#include "warpu/metrics.hpp"
#include "warpu/mixture_fit.hpp"
#include "warpu/numeric.hpp"
#include "warpu/targets.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

using namespace warpu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError({"cannot open config '" + path + "'"});
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
}

fs::path out_dir(const Common& c, const json& j) {
  fs::path p = !c.out.empty() ? fs::path(c.out) : fs::path(j.value("output", std::string("out")));
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InputError("cannot write " + p.string());
  os << text;
}

// Rows of numbers; a first line that does not parse is taken as a header.
// `columns` picks named columns and needs that header.
Eigen::MatrixXd read_matrix_csv(const std::string& path, const std::vector<std::string>& columns) {
  std::ifstream is(path);
  if (!is) throw ConfigError({"cannot open samples '" + path + "'"});
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    bool ok = true;
    while (std::getline(ls, cell, ',')) {
      cells.push_back(cell);
      try {
        r.push_back(std::stod(cell));
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (first) {
        first = false;
        header = cells;
        continue;
      }
      throw InputError(path + ": non-numeric row '" + line + "'");
    }
    first = false;
    if (!rows.empty() && r.size() != rows[0].size()) throw InputError(path + ": ragged rows");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InputError(path + ": no rows");
  std::vector<std::size_t> pick;
  if (columns.empty()) {
    for (std::size_t k = 0; k < rows[0].size(); ++k) pick.push_back(k);
  } else {
    for (const auto& name : columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw ConfigError({"config.columns: '" + name + "' not in the header of " + path});
      pick.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  Eigen::MatrixXd x(rows.size(), pick.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < pick.size(); ++k) x(i, k) = rows[i][pick[k]];
  return x;
}

// Target plus mixture, shared by estimate, unbiased and diag.
struct Problem {
  TargetInfo info;
  GaussianMixture mix;
};

Problem target_and_mixture(JsonFields& f, std::vector<std::string>& problems, std::uint64_t seed, int K) {
  const json* t = f.child("target");
  if (!t) {
    f.check(false, "target", "required");
    throw_if_problems(problems);
  }
  std::optional<TargetInfo> info;
  try {
    info = make_target(*t);
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  } catch (const InputError& e) {
    problems.push_back(std::string("target: ") + e.what());
  }
  throw_if_problems(problems);
  MixtureSpec spec;
  if (const json* m = f.child("mixture")) spec = parse_mixture_spec(*m, &*info, "config.mixture", problems);
  else if (!info->mixture) spec.source = "fit";
  throw_if_problems(problems);
  CounterRng rng = CounterRng(seed).split(2);
  GaussianMixture mix = build_mixture(spec, *info, K, rng);
  return Problem{std::move(*info), std::move(mix)};
}

int cmd_fit(const Common& c) {
  const json j = load_json(c.config);
  std::vector<std::string> problems;
  JsonFields f(j, "config", problems);
  const std::string samples = f.req<std::string>("samples");
  const auto columns = f.get<std::vector<std::string>>("columns", {});
  std::vector<int> Ks;
  if (const json* k = f.child("K")) {
    if (k->is_number_integer()) Ks = {k->get<int>()};
    else if (k->is_array()) Ks = k->get<std::vector<int>>();
    else f.check(false, "K", "expected an integer or a list");
  } else {
    f.check(false, "K", "required");
  }
  for (int k : Ks) f.check(k > 0, "K", "must be positive");
  FitConstraints fc;
  if (const json* cj = f.child("constraints")) {
    JsonFields cf(*cj, "config.constraints", problems);
    fc.k_max = cf.get<int>("k_max", fc.k_max);
    fc.det_min = cf.get<double>("det_min", fc.det_min);
    fc.det_max = cf.get<double>("det_max", fc.det_max);
    fc.mean_bound = cf.get<double>("mean_bound", fc.mean_bound);
    cf.finish();
  }
  EmOptions eo;
  eo.max_iter = f.get<int>("max_iter", eo.max_iter);
  eo.rel_tol = f.get<double>("rel_tol", eo.rel_tol);
  eo.seed = c.seed.value_or(f.get<std::uint64_t>("seed", 0));
  f.get<std::string>("output", "");
  f.finish();
  throw_if_problems(problems);
  try {
    fc.validate();
  } catch (const InputError& e) {
    throw ConfigError({std::string("config.constraints: ") + e.what()});
  }

  const Eigen::MatrixXd x = read_matrix_csv(samples, columns);
  json report;
  int bestK = Ks[0];
  if (Ks.size() > 1) {
    json sweep = json::array();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : bic_sweep(x, Ks, fc, eo)) {
      sweep.push_back({{"K", e.K}, {"log_likelihood", e.log_likelihood}, {"bic", e.bic}});
      if (e.bic < best) {
        best = e.bic;
        bestK = e.K;
      }
    }
    report["bic"] = sweep;
  }
  const EmResult res = em_fit(x, bestK, fc, eo);
  report["K"] = bestK;
  report["iterations"] = res.iterations;
  report["converged"] = res.converged;
  report["reseeded"] = res.reseeded;
  report["log_likelihood"] = res.log_likelihood.empty() ? 0.0 : res.log_likelihood.back();
  const fs::path dir = out_dir(c, j);
  write_file(dir / "mixture.txt", res.mixture.serialize());
  write_file(dir / "fit.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return kOk;
}

ExperimentConfig experiment_from(const Common& c, json j) {
  if (c.seed) j["seeds"] = {*c.seed};
  if (!c.out.empty()) j["output"] = c.out;
  if (c.threads > 0) j["threads"] = c.threads;
  return parse_experiment_config(j);
}

int cmd_sample(const Common& c) {
  json j = load_json(c.config);
  if (j.is_object() && j.contains("estimators") && !j["estimators"].empty())
    throw ConfigError({"config.estimators: not used by `sample`, run `bench` instead"});
  const ExperimentConfig cfg = experiment_from(c, j);
  const auto res = run_experiment(cfg);
  std::cout << res.summary.dump(2) << "\n";
  return kOk;
}

int cmd_bench(const Common& c) {
  const ExperimentConfig cfg = experiment_from(c, load_json(c.config));
  const auto res = run_experiment(cfg);
  std::cout << res.summary.dump(2) << "\n";
  return kOk;
}

int cmd_estimate(const Common& c) {
  const json j = load_json(c.config);
  std::vector<std::string> problems;
  JsonFields f(j, "config", problems);
  const std::uint64_t seed = c.seed.value_or(f.get<std::uint64_t>("seed", 0));
  const int K = f.get<int>("K", 5);
  const auto traces = f.req<std::vector<std::string>>("traces");
  const auto methods = f.get<std::vector<std::string>>("methods", {"bs", "wb", "swb"});
  const int n2 = f.get<int>("n2", 1000);
  const int burn = f.get<int>("burn_in", 0);
  SwbOptions so;
  so.min_component_count = f.get<int>("min_component_count", 1);
  so.policy = f.get<bool>("merge_small_components", false) ? SmallComponentPolicy::MergeNearest
                                                            : SmallComponentPolicy::Error;
  f.check(n2 > 0, "n2", "must be positive");
  f.check(burn >= 0, "burn_in", "must be nonnegative");
  f.check(!traces.empty(), "traces", "must list at least one trace file");
  for (const auto& m : methods)
    f.check(m == "bs" || m == "wb" || m == "swb" || m == "wb_cached" || m == "swb_cached", "methods",
            "unknown method '" + m + "'");
  const Problem p = target_and_mixture(f, problems, seed, K);
  f.get<std::string>("output", "");
  f.finish();
  throw_if_problems(problems);

  json out = json::array();
  CounterRng root(seed);
  for (std::size_t ti = 0; ti < traces.size(); ++ti) {
    std::ifstream is(traces[ti]);
    if (!is) throw ConfigError({"config.traces: cannot open '" + traces[ti] + "'"});
    SamplerTrace tr = read_trace_csv(is);
    if (tr.dim() != p.info.target.dim()) throw ConfigError({"config.traces: '" + traces[ti] + "' has wrong width"});
    if (burn >= tr.size()) throw ConfigError({"config.burn_in: not smaller than the trace length"});
    const Eigen::MatrixXd pi = tr.samples.bottomRows(tr.size() - burn);
    json per;
    per["trace"] = traces[ti];
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const std::string& m = methods[mi];
      CounterRng rng = root.split(100 + ti * 1000 + mi);
      p.info.target.reset_count();
      EstimatorReport r;
      if (m == "bs") {
        Eigen::MatrixXd y(n2, p.mix.dim());
        for (int i = 0; i < n2; ++i) y.row(i) = p.mix.sample(rng).transpose();
        r = classical_bridge_estimate(p.info.target, p.mix, pi, y);
      } else if (m == "wb") {
        r = warpu_bridge_estimate(p.info.target, p.mix, pi, standard_normal_draws(n2, p.mix.dim(), rng), rng);
      } else if (m == "swb") {
        so.n2_per_component = n2;
        r = stochastic_warpu_bridge(p.info.target, p.mix, pi, so, rng);
      } else {
        if (!tr.has_cache()) throw ConfigError({"config.methods: '" + m + "' needs a trace written with caches"});
        if (m == "wb_cached") {
          r = warpu_bridge_from_trace(p.info.target, p.mix, tr, standard_normal_draws(n2, p.mix.dim(), rng));
        } else {
          so.n2_per_component = n2;
          r = stochastic_warpu_bridge_from_trace(p.info.target, p.mix, tr, so, rng);
        }
      }
      per[m] = to_json(r);
    }
    out.push_back(per);
  }
  const fs::path dir = out_dir(c, j);
  write_file(dir / "estimates.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return kOk;
}

std::function<double(const Eigen::VectorXd&)> test_function(const std::string& name) {
  if (name == "sum") return [](const Eigen::VectorXd& x) { return x.sum(); };
  if (name == "sum_sq") return [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  if (name == "first") return [](const Eigen::VectorXd& x) { return x[0]; };
  throw ConfigError({"config.h: unknown test function '" + name + "' (sum, sum_sq, first)"});
}

int cmd_unbiased(const Common& c) {
  const json j = load_json(c.config);
  std::vector<std::string> problems;
  JsonFields f(j, "config", problems);
  const std::uint64_t seed = c.seed.value_or(f.get<std::uint64_t>("seed", 0));
  const int K = f.get<int>("K", 5);
  CoupledRunConfig rc;
  rc.l = f.get<int>("l", 50);
  rc.m = f.get<int>("m", 200);
  rc.max_iter = f.get<int>("max_iter", rc.max_iter);
  rc.levels = f.get<std::vector<int>>("levels", {0, 1});
  const int reps = f.get<int>("replicates", 100);
  const auto hs = f.get<std::vector<std::string>>("h", {"sum"});
  rc.step.sigma = f.get<double>("sigma", 1.0);
  rc.step.combined = f.get<bool>("combined", false);
  const std::string prop = f.get<std::string>("proposal", "maximal");
  f.check(prop == "maximal" || prop == "reflection", "proposal", "expected maximal or reflection");
  rc.step.proposal = prop == "reflection" ? ProposalCoupling::Reflection : ProposalCoupling::Maximal;
  f.check(rc.l >= 0 && rc.m >= rc.l, "m", "need 0 <= l <= m");
  f.check(reps > 0, "replicates", "must be positive");
  f.check(rc.step.sigma > 0.0, "sigma", "must be positive");
  for (int lv : rc.levels) f.check(lv >= 0 && lv <= 2, "levels", "must be 0, 1 or 2");
  const Problem p = target_and_mixture(f, problems, seed, K);
  if (const json* init = f.child("init")) rc.init = parse_initial_density(*init, p.info.target.dim(), "config.init", problems);
  else f.check(false, "init", "required");
  f.get<std::string>("output", "");
  f.finish();
  throw_if_problems(problems);
  for (const auto& h : hs) rc.h.push_back(test_function(h));

  std::vector<CoupledRecord> recs;
  std::vector<int> taus;
  std::vector<std::vector<std::vector<double>>> vals(rc.levels.size(), std::vector<std::vector<double>>(hs.size()));
  int unmet = 0;
  for (int r = 0; r < reps; ++r) {
    rc.seed = CounterRng::for_replicate(seed, r).key();
    const CoupledRun run = run_coupled_chains(p.info.target, p.mix, rc);
    if (run.tau < 0) {
      ++unmet;
      continue;
    }
    taus.push_back(run.tau);
    for (std::size_t li = 0; li < rc.levels.size(); ++li)
      for (std::size_t hi = 0; hi < hs.size(); ++hi) {
        const double H = unbiased_H_lm(run.h1[li][hi], run.h2[li][hi], run.tau, rc.l, rc.m);
        vals[li][hi].push_back(H);
        recs.push_back({r, run.tau, static_cast<int>(hi), rc.levels[li], H, run.wall_ms});
      }
  }
  if (taus.empty()) throw NumericError("no coupled pair met within max_iter");
  json summary;
  summary["replicates"] = reps;
  summary["unmet"] = unmet;
  const SurvivalSummary sv = meeting_time_survival(taus);
  summary["median_tau"] = sv.median;
  summary["log_survival_slope"] = sv.log_slope;
  json est = json::array();
  for (std::size_t li = 0; li < rc.levels.size(); ++li)
    for (std::size_t hi = 0; hi < hs.size(); ++hi) {
      const auto& v = vals[li][hi];
      double m = 0.0, s = 0.0;
      for (double x : v) m += x;
      m /= v.size();
      for (double x : v) s += (x - m) * (x - m);
      const double se = v.size() > 1 ? std::sqrt(s / (v.size() - 1) / v.size()) : 0.0;
      est.push_back({{"h", hs[hi]}, {"level", rc.levels[li]}, {"mean", m}, {"se", se}});
    }
  summary["estimates"] = est;
  const fs::path dir = out_dir(c, j);
  std::ofstream os(dir / "coupled.csv");
  write_coupled_csv(recs, os);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_diag(const Common& c) {
  const json j = load_json(c.config);
  std::vector<std::string> problems;
  JsonFields f(j, "config", problems);
  const std::uint64_t seed = c.seed.value_or(f.get<std::uint64_t>("seed", 0));
  const int K = f.get<int>("K", 5);
  const int n1 = f.get<int>("n1", 1000), n2 = f.get<int>("n2", 1000);
  f.check(n1 > 0 && n2 > 0, "n1", "sample sizes must be positive");
  DiagnosticsOptions o;
  o.seed = seed;
  const std::string method = f.get<std::string>("method", "auto");
  if (method == "quadrature") o.method = DiagnosticsOptions::Method::Quadrature;
  else if (method == "monte_carlo") o.method = DiagnosticsOptions::Method::MonteCarlo;
  else f.check(method == "auto", "method", "expected auto, quadrature or monte_carlo");
  o.mc_draws = f.get<int>("mc_draws", o.mc_draws);
  o.half_width = f.get<double>("half_width", o.half_width);
  const Problem p = target_and_mixture(f, problems, seed, K);
  f.get<std::string>("output", "");
  f.finish();
  throw_if_problems(problems);
  json out = to_json(asymptotic_variance_diagnostics(p.mix, p.info.target, n1, n2, o));
  out["predicted_pps_ratio"] = predicted_pps_ratio(static_cast<double>(n2) / n1, p.mix.size());
  const fs::path dir = out_dir(c, j);
  write_file(dir / "diag.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warp-U sampling, bridge estimation and coupled-chain benchmarks"};
  app.require_subcommand(1);
  Common common;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sc = app.add_subcommand(name, help);
    sc->add_option("--config", common.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sc->add_option("--seed", common.seed, "override the config seed");
    sc->add_option("--out", common.out, "output directory");
    sc->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    return sc;
  };
  CLI::App* fit = add("fit", "EM fit of a Gaussian mixture to a sample file");
  CLI::App* sample = add("sample", "run a sampler and write traces");
  CLI::App* estimate = add("estimate", "bridge-family estimates of c from trace files");
  CLI::App* unbiased = add("unbiased", "coupled Warp-U chains and unbiased estimates");
  CLI::App* bench = add("bench", "full experiment: sampler, estimators, summaries");
  CLI::App* diag = add("diag", "divergence and asymptotic variance diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  try {
    if (*fit) return cmd_fit(common);
    if (*sample) return cmd_sample(common);
    if (*estimate) return cmd_estimate(common);
    if (*unbiased) return cmd_unbiased(common);
    if (*bench) return cmd_bench(common);
    if (*diag) return cmd_diag(common);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
