// Command-line front end: critical, simulate, branch, oracle, sweep.
//
// Values from --config are applied first; explicit flags override them.
// Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 precondition
// violation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "massext/harness.hpp"

namespace {

using massext::json;

enum ExitCode { kOk = 0, kInvalid = 2, kIo = 3, kPrecondition = 4 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "Output path (stdout when omitted)");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

json load_config(const Common& c) {
  return c.config.empty() ? json::object() : massext::read_json_file(c.config);
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty())
    std::cout << text;
  else
    massext::write_text(c.out, text);
}

template <typename T>
T pick(const std::optional<T>& flag, const json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) return cfg.at(key).get<T>();
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-extinction evolution process on the rooted d-ary tree"};
  app.require_subcommand(1);

  // critical
  Common crit_c;
  std::vector<int> crit_d;
  std::optional<double> crit_tol;
  auto* crit = app.add_subcommand("critical", "Solve lambda_c(d) and lambda_s(d)");
  add_common(crit, crit_c);
  crit->add_option("--d", crit_d, "Branching degrees (default 2..7)");
  crit->add_option("--tol", crit_tol, "Bisection width");

  // simulate
  Common sim_c;
  std::optional<int> sim_d;
  std::optional<double> sim_lambda;
  std::optional<std::uint64_t> sim_replicas, sim_max_live, sim_max_type, sim_max_events;
  std::optional<double> sim_max_time;
  std::string sim_runs, sim_trace;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo survival estimate on the full tree");
  add_common(sim, sim_c);
  sim->add_option("--d", sim_d, "Branching degree");
  sim->add_option("--lambda", sim_lambda, "Mutation rate");
  sim->add_option("--replicas", sim_replicas, "Number of replicas");
  sim->add_option("--max-time", sim_max_time, "Censor runs at this time");
  sim->add_option("--max-live", sim_max_live, "Censor at this many live particles");
  sim->add_option("--max-type", sim_max_type, "Censor once this type is born");
  sim->add_option("--max-events", sim_max_events, "Censor after this many events");
  sim->add_option("--runs", sim_runs, "Per-run CSV output path");
  sim->add_option("--trace", sim_trace, "Event trace of replica 0");

  // branch
  Common br_c;
  std::optional<int> br_d;
  std::optional<double> br_lambda;
  std::optional<std::uint64_t> br_replicas, br_steps;
  bool br_cross = false;
  auto* br = app.add_subcommand("branch", "Embedded clan chain along a fixed branch");
  add_common(br, br_c);
  br->add_option("--d", br_d, "Branching degree");
  br->add_option("--lambda", br_lambda, "Mutation rate");
  br->add_option("--replicas", br_replicas, "Number of chains");
  br->add_option("--max-steps", br_steps, "Censor chains after this many steps");
  br->add_flag("--engine-crosscheck", br_cross, "Also track the all-ones branch in engine runs");

  // oracle
  Common or_c;
  std::optional<int> or_d, or_k;
  std::optional<double> or_lambda;
  std::optional<std::uint64_t> or_n;
  bool or_cross = false;
  auto* orc = app.add_subcommand("oracle", "Level-k birth probability and decay rate");
  add_common(orc, or_c);
  orc->add_option("--d", or_d, "Branching degree");
  orc->add_option("--lambda", or_lambda, "Mutation rate");
  orc->add_option("--k", or_k, "Level");
  orc->add_option("--replicas,--samples", or_n, "Monte Carlo sample count");
  orc->add_flag("--engine-crosscheck", or_cross, "Compare d^k p with engine type-k counts");

  // sweep
  Common sw_c;
  std::vector<int> sw_d;
  std::vector<double> sw_lambda;
  std::vector<std::string> sw_targets;
  std::optional<std::uint64_t> sw_replicas;
  std::optional<double> sw_tol;
  auto* sw = app.add_subcommand("sweep", "Grid of (d, lambda) estimates as CSV");
  add_common(sw, sw_c);
  sw->add_option("--d", sw_d, "Branching degrees");
  sw->add_option("--lambda", sw_lambda, "Lambda values");
  sw->add_option("--targets", sw_targets,
                 "Subset of tree_survival, branch_extinction, critical_values");
  sw->add_option("--replicas", sw_replicas, "Replicas per cell");
  sw->add_option("--tol", sw_tol, "Solver tolerance for critical_values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (crit->parsed()) {
      const json cfg = load_config(crit_c);
      std::vector<int> ds = crit_d;
      if (ds.empty()) ds = cfg.value("d_values", std::vector<int>{2, 3, 4, 5, 6, 7});
      emit(crit_c, massext::critical_csv(ds, pick(crit_tol, cfg, "tol", massext::kDefaultSolverTol)));
    } else if (sim->parsed()) {
      const json cfg = load_config(sim_c);
      massext::SimulateOptions opt;
      opt.params.d = pick(sim_d, cfg, "d", 2);
      opt.params.lambda = pick(sim_lambda, cfg, "lambda", 0.5);
      opt.n_replicas = pick(sim_replicas, cfg, "n_replicas", std::uint64_t{1000});
      opt.master_seed = pick(sim_c.seed, cfg, "master_seed", std::uint64_t{1});
      opt.threads = pick(sim_c.threads, cfg, "threads", 0u);
      opt.stop = cfg.contains("stop") ? massext::stop_rule_from_json(cfg.at("stop")) : massext::StopRule{};
      if (sim_max_time) opt.stop.max_time = sim_max_time;
      if (sim_max_live) opt.stop.max_live_particles = sim_max_live;
      if (sim_max_type) opt.stop.max_type_born = sim_max_type;
      if (sim_max_events) opt.stop.max_events = sim_max_events;
      opt.params.validate();
      opt.stop.validate();

      const auto result = massext::simulate(opt);
      emit(sim_c, result.summary.dump(2) + "\n");
      if (!sim_runs.empty()) massext::write_text(sim_runs, massext::runs_csv(result.records));
      if (!sim_trace.empty()) massext::write_text(sim_trace, massext::trace_replica0(opt));
    } else if (br->parsed()) {
      const json cfg = load_config(br_c);
      massext::BranchOptions opt;
      opt.d = pick(br_d, cfg, "d", opt.d);
      opt.lambda = pick(br_lambda, cfg, "lambda", opt.lambda);
      opt.n_replicas = pick(br_replicas, cfg, "n_replicas", opt.n_replicas);
      opt.max_steps = pick(br_steps, cfg, "max_steps", opt.max_steps);
      opt.master_seed = pick(br_c.seed, cfg, "master_seed", opt.master_seed);
      opt.threads = pick(br_c.threads, cfg, "threads", opt.threads);
      opt.engine_crosscheck = br_cross || cfg.value("engine_crosscheck", false);
      emit(br_c, massext::branch_report(opt).dump(2) + "\n");
    } else if (orc->parsed()) {
      const json cfg = load_config(or_c);
      massext::OracleOptions opt;
      opt.d = pick(or_d, cfg, "d", opt.d);
      opt.lambda = pick(or_lambda, cfg, "lambda", opt.lambda);
      opt.k = pick(or_k, cfg, "k", opt.k);
      opt.n_samples = pick(or_n, cfg, "n", opt.n_samples);
      opt.master_seed = pick(or_c.seed, cfg, "master_seed", opt.master_seed);
      opt.threads = pick(or_c.threads, cfg, "threads", opt.threads);
      opt.engine_crosscheck = or_cross || cfg.value("engine_crosscheck", false);
      emit(or_c, massext::oracle_report(opt).dump(2) + "\n");
    } else if (sw->parsed()) {
      const json cfg = load_config(sw_c);
      massext::SweepSpec spec = massext::sweep_spec_from_json(cfg);
      if (!sw_d.empty()) spec.d_values = sw_d;
      if (!sw_lambda.empty()) spec.lambdas = sw_lambda;
      if (!sw_targets.empty()) spec.targets = sw_targets;
      if (sw_replicas) spec.n_replicas = *sw_replicas;
      if (sw_tol) spec.tol = *sw_tol;
      if (sw_c.seed) spec.master_seed = *sw_c.seed;
      if (sw_c.threads) spec.threads = *sw_c.threads;
      emit(sw_c, massext::rows_csv(massext::run_sweep(spec)));
    }
  } catch (const massext::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const massext::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << '\n';
    return kPrecondition;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kInvalid;
  }
  return kOk;
}
