#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "massext/branch.hpp"
#include "massext/criticality.hpp"
#include "massext/engine.hpp"
#include "massext/errors.hpp"
#include "massext/oracles.hpp"

namespace massext {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting and file output

inline std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Stop rule (de)serialization. Absent keys keep defaults; null disables.

inline json to_json(const StopRule& s) {
  auto opt = [](const auto& v) -> json { return v ? json(*v) : json(nullptr); };
  return {{"max_time", opt(s.max_time)},
          {"max_live_particles", opt(s.max_live_particles)},
          {"max_type_born", opt(s.max_type_born)},
          {"max_events", opt(s.max_events)}};
}

inline StopRule stop_rule_from_json(const json& j, StopRule base = {}) {
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    using T = typename std::decay_t<decltype(field)>::value_type;
    field = j.at(key).is_null() ? std::nullopt : std::optional<T>(j.at(key).get<T>());
  };
  read("max_time", base.max_time);
  read("max_live_particles", base.max_live_particles);
  read("max_type_born", base.max_type_born);
  read("max_events", base.max_events);
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// critical

struct CriticalRow {
  int d;
  double lambda_c;
  double lambda_s;
};

inline std::vector<CriticalRow> critical_table(const std::vector<int>& d_values,
                                               double tol = kDefaultSolverTol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  std::vector<CriticalRow> rows;
  for (int d : d_values)
    rows.push_back({d, solve_lambda_c(d, tol).value, solve_lambda_s(d, tol).value});
  return rows;
}

inline std::string critical_csv(const std::vector<int>& d_values, double tol = kDefaultSolverTol) {
  std::ostringstream out;
  out << "d,lambda_c,lambda_s\n";
  for (const auto& r : critical_table(d_values, tol))
    out << r.d << ',' << fmt6(r.lambda_c) << ',' << fmt6(r.lambda_s) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// simulate

inline json survival_json(const SurvivalEstimate& est) {
  json hist = json::object();
  for (const auto& [type, count] : est.max_type_histogram) hist[std::to_string(type)] = count;
  return {{"p_hat", est.p_hat},
          {"wilson_95", {est.wilson_95.lo, est.wilson_95.hi}},
          {"survived", est.survived},
          {"extinct", est.extinct},
          {"indeterminate", est.indeterminate},
          {"censored_fraction", est.censored_fraction},
          {"mean_total_born", est.mean_total_born},
          {"se_total_born", est.se_total_born},
          {"mean_born_by_type", est.mean_born_by_type},
          {"max_type_histogram", hist}};
}

inline std::string runs_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "replica,seed,outcome,reason,end_time,total_born,max_type_reached,event_count\n";
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const auto* c = std::get_if<Censored>(&rec.outcome);
    out << r << ',' << rec.seed << ',' << (c ? "censored" : "extinct") << ','
        << (c ? to_string(c->reason) : "") << ',' << fmt6(rec.end_time()) << ','
        << rec.total_born << ',' << rec.max_type_reached << ',' << rec.event_count << '\n';
  }
  return out.str();
}

struct SimulateOptions {
  ModelParams params;
  StopRule stop;
  std::uint64_t n_replicas = 1000;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;
};

struct SimulateOutput {
  json summary;
  std::vector<RunRecord> records;
};

inline SimulateOutput simulate(const SimulateOptions& opt) {
  if (opt.n_replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  SimulateOutput out;
  out.records = run_replicas(opt.params, opt.stop, opt.n_replicas, opt.master_seed, opt.threads);
  out.summary = {{"d", opt.params.d},
                 {"lambda", opt.params.lambda},
                 {"replicas", opt.n_replicas},
                 {"master_seed", opt.master_seed},
                 {"stop", to_json(opt.stop)},
                 {"survival", survival_json(summarize(out.records))}};
  return out;
}

// Trace of replica 0, regenerated from its seed.
inline std::string trace_replica0(const SimulateOptions& opt) {
  std::ostringstream out;
  out << "event_index,time,kind,type,vertex\n";
  run(opt.params, opt.stop, derive_seed(opt.master_seed, kSurvivalTag, 0, 0), &out);
  return out.str();
}

// ---------------------------------------------------------------------------
// branch

struct BranchOptions {
  int d = 2;
  double lambda = 1.0;
  std::uint64_t n_replicas = 10000;
  std::uint64_t max_steps = 100000;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;
  bool engine_crosscheck = false;
  std::uint64_t crosscheck_runs = 200;
  StopRule crosscheck_stop{std::nullopt, 20000, 10000, 1000000};
};

inline json branch_report(const BranchOptions& opt) {
  const ChainParams cp = chain_params(opt.d, opt.lambda);
  const ChainEstimate est = estimate_branch_extinction(opt.d, opt.lambda, opt.n_replicas,
                                                       opt.max_steps, opt.master_seed, opt.threads);
  json report = {{"d", opt.d},
                 {"lambda", opt.lambda},
                 {"p_up", cp.p},
                 {"q_down", cp.q},
                 {"h_d", h_d(opt.d, opt.lambda)},
                 {"extinction_prob_analytic", cp.extinction_prob},
                 {"replicas", opt.n_replicas},
                 {"max_steps", opt.max_steps},
                 {"master_seed", opt.master_seed},
                 {"extinction_fraction", est.extinction_fraction},
                 {"wilson_95", {est.wilson_95.lo, est.wilson_95.hi}},
                 {"censored", est.censored}};
  if (opt.engine_crosscheck) {
    const BranchCrossCheck cc = engine_branch_crosscheck(
        {opt.d, opt.lambda}, opt.crosscheck_stop, opt.crosscheck_runs, opt.master_seed);
    report["engine_crosscheck"] = {{"runs", cc.runs},
                                   {"branch_extinct", cc.branch_extinct},
                                   {"undecided", cc.undecided},
                                   {"up_moves", cc.up_moves},
                                   {"down_moves", cc.down_moves},
                                   {"empirical_p", cc.empirical_p},
                                   {"analytic_p", cc.analytic_p},
                                   {"empirical_extinction", cc.empirical_extinction},
                                   {"analytic_extinction", cc.analytic_extinction}};
  }
  return report;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleOptions {
  int d = 2;
  double lambda = 0.25;
  int k = 1;
  std::uint64_t n_samples = 100000;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;
  bool engine_crosscheck = false;
  std::uint64_t engine_replicas = 100000;
};

inline json oracle_report(const OracleOptions& opt) {
  require_negative_drift(opt.d, opt.lambda);
  const ProbEstimate plain =
      estimate_levelk_prob(opt.d, opt.lambda, opt.k, opt.n_samples, opt.master_seed, opt.threads);
  const RateEstimate rate =
      ld_rate(opt.d, opt.lambda, opt.k, opt.n_samples, opt.master_seed, opt.threads);
  auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };

  json report = {{"d", opt.d},
                 {"lambda", opt.lambda},
                 {"k", opt.k},
                 {"n", opt.n_samples},
                 {"master_seed", opt.master_seed},
                 {"p_hat", plain.p_hat},
                 {"std_error", plain.std_error},
                 {"ci95", {plain.ci95.lo, plain.ci95.hi}},
                 {"hits", plain.hits},
                 {"log_rate", finite_or_null(rate.log_rate)},
                 {"analytic_rate", rate.analytic_rate},
                 {"tilted", {{"p_hat", rate.p_hat}, {"std_error", rate.std_error},
                             {"u", rate.tilt_u}}}};
  if (opt.k == 1) {
    const double p = p_up(opt.d, opt.lambda);
    report["one_step"] = {{"p_up", p},
                          {"within_ci", plain.ci95.lo <= p && p <= plain.ci95.hi}};
  }
  if (opt.engine_crosscheck) {
    const SurvivalEstimate eng = summarize(run_replicas(
        {opt.d, opt.lambda}, StopRule{}, opt.engine_replicas, opt.master_seed, opt.threads, 0,
        "oracle_crosscheck"));
    const auto kk = static_cast<std::size_t>(opt.k);
    const double eng_mean = kk < eng.mean_born_by_type.size() ? eng.mean_born_by_type[kk] : 0.0;
    const double eng_se = kk < eng.se_born_by_type.size() ? eng.se_born_by_type[kk] : 0.0;
    const double scale = std::pow(static_cast<double>(opt.d), opt.k);
    report["engine_crosscheck"] = {
        {"engine_mean_born", eng_mean},
        {"engine_se", eng_se},
        {"oracle_mean_born", scale * plain.p_hat},
        {"oracle_se", scale * plain.std_error},
        {"overlap_3sigma",
         overlap_3sigma(eng_mean, eng_se, scale * plain.p_hat, scale * plain.std_error)}};
  }
  return report;
}

// ---------------------------------------------------------------------------
// sweep

inline constexpr const char* kTargetTree = "tree_survival";
inline constexpr const char* kTargetBranch = "branch_extinction";
inline constexpr const char* kTargetCritical = "critical_values";

struct SweepSpec {
  std::vector<int> d_values{2};
  std::vector<double> lambdas;
  std::uint64_t n_replicas = 1000;
  StopRule stop;
  std::uint64_t master_seed = 1;
  std::vector<std::string> targets{kTargetTree, kTargetBranch};
  std::uint64_t chain_max_steps = 100000;
  double tol = kDefaultSolverTol;
  unsigned threads = 0;

  void validate() const {
    if (targets.empty()) throw std::invalid_argument("no targets selected");
    for (const auto& t : targets)
      if (t != kTargetTree && t != kTargetBranch && t != kTargetCritical)
        throw std::invalid_argument("unknown target '" + t + "'");
    if (d_values.empty()) throw std::invalid_argument("d_values must be nonempty");
    for (int d : d_values)
      if (d < 1) throw std::invalid_argument("d must be >= 1");
    if (lambdas.empty()) throw std::invalid_argument("lambda grid must be nonempty");
    for (double l : lambdas)
      if (!(l >= 0.0)) throw std::invalid_argument("lambda values must be >= 0");
    if (n_replicas < 1) throw std::invalid_argument("n_replicas must be >= 1");
    stop.validate();
  }

  bool has_target(const std::string& t) const {
    return std::find(targets.begin(), targets.end(), t) != targets.end();
  }
};

// `steps` evenly spaced points from min to max inclusive.
inline std::vector<double> lambda_range(double min, double max, int steps) {
  if (steps < 1) throw std::invalid_argument("lambda grid steps must be >= 1");
  if (max < min) throw std::invalid_argument("lambda grid max < min");
  std::vector<double> out;
  for (int i = 0; i < steps; ++i)
    out.push_back(steps == 1 ? min : min + (max - min) * i / (steps - 1));
  return out;
}

inline SweepSpec sweep_spec_from_json(const json& j, SweepSpec spec = {}) {
  if (j.contains("d_values")) spec.d_values = j.at("d_values").get<std::vector<int>>();
  if (j.contains("lambda_grid")) {
    const json& g = j.at("lambda_grid");
    if (g.is_array())
      spec.lambdas = g.get<std::vector<double>>();
    else
      spec.lambdas = lambda_range(g.at("min").get<double>(), g.at("max").get<double>(),
                                  g.at("steps").get<int>());
  }
  if (j.contains("n_replicas")) spec.n_replicas = j.at("n_replicas").get<std::uint64_t>();
  if (j.contains("stop")) spec.stop = stop_rule_from_json(j.at("stop"), spec.stop);
  if (j.contains("master_seed")) spec.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("targets")) spec.targets = j.at("targets").get<std::vector<std::string>>();
  if (j.contains("chain_max_steps"))
    spec.chain_max_steps = j.at("chain_max_steps").get<std::uint64_t>();
  if (j.contains("tol")) spec.tol = j.at("tol").get<double>();
  if (j.contains("threads")) spec.threads = j.at("threads").get<unsigned>();
  return spec;
}

struct ResultRow {
  int d = 0;
  double lambda = 0.0;
  std::string target;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::uint64_t n = 0;
  double censored_fraction = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kResultHeader = "d,lambda,target,estimate,ci_lo,ci_hi,n,censored_fraction,seed";

// Cell (d_index, lambda_index) is row d_index * |lambdas| + lambda_index of
// the substream key; targets are separated by the tag.
inline std::vector<ResultRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<ResultRow> rows;
  const std::size_t nl = spec.lambdas.size();
  for (std::size_t di = 0; di < spec.d_values.size(); ++di) {
    const int d = spec.d_values[di];
    for (std::size_t li = 0; li < nl; ++li) {
      const double lambda = spec.lambdas[li];
      const std::uint64_t row = di * nl + li;
      if (spec.has_target(kTargetTree)) {
        const SurvivalEstimate est = estimate_survival({d, lambda}, spec.stop, spec.n_replicas,
                                                       spec.master_seed, spec.threads, row);
        rows.push_back({d, lambda, kTargetTree, est.p_hat, est.wilson_95.lo, est.wilson_95.hi,
                        est.n, est.censored_fraction, spec.master_seed});
      }
      if (spec.has_target(kTargetBranch)) {
        const ChainEstimate est =
            estimate_branch_extinction(d, lambda, spec.n_replicas, spec.chain_max_steps,
                                       spec.master_seed, spec.threads, row);
        rows.push_back({d, lambda, kTargetBranch, est.extinction_fraction, est.wilson_95.lo,
                        est.wilson_95.hi, est.n,
                        static_cast<double>(est.censored) / static_cast<double>(est.n),
                        spec.master_seed});
      }
    }
    if (spec.has_target(kTargetCritical)) {
      const CriticalResult c = solve_lambda_c(d, spec.tol);
      const CriticalResult s = solve_lambda_s(d, spec.tol);
      rows.push_back({d, c.value, "lambda_c", c.value, c.bracket.lo, c.bracket.hi, 0, 0.0, 0});
      rows.push_back({d, s.value, "lambda_s", s.value, s.bracket.lo, s.bracket.hi, 0, 0.0, 0});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.d, a.lambda, a.target) < std::tie(b.d, b.lambda, b.target);
  });
  return rows;
}

inline std::string rows_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kResultHeader << '\n';
  for (const auto& r : rows)
    out << r.d << ',' << fmt6(r.lambda) << ',' << r.target << ',' << fmt6(r.estimate) << ','
        << fmt6(r.ci_lo) << ',' << fmt6(r.ci_hi) << ',' << r.n << ','
        << fmt6(r.censored_fraction) << ',' << r.seed << '\n';
  return out.str();
}

// Every replica seed a sweep would draw, for collision checks.
inline std::vector<std::uint64_t> sweep_replica_seeds(const SweepSpec& spec) {
  std::vector<std::uint64_t> seeds;
  const std::size_t cells = spec.d_values.size() * spec.lambdas.size();
  for (std::uint64_t row = 0; row < cells; ++row)
    for (std::uint64_t r = 0; r < spec.n_replicas; ++r) {
      if (spec.has_target(kTargetTree))
        seeds.push_back(derive_seed(spec.master_seed, kSurvivalTag, row, r));
      if (spec.has_target(kTargetBranch))
        seeds.push_back(derive_seed(spec.master_seed, kBranchTag, row, r));
    }
  return seeds;
}

}  // namespace massext
