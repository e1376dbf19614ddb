#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <sys/wait.h>

#include "massext/harness.hpp"

using namespace massext;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n') + 1); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "massext_tests";
  fs::create_directories(dir);
  return dir / name;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(MASSEXT_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Critical, HeaderGolden) {
  EXPECT_EQ(first_line(critical_csv({2})), slurp(std::string(MASSEXT_TEST_DATA) + "/critical_header.csv"));
}

TEST(Critical, TableAndGoldenRatio) {
  const auto rows = critical_table({2, 3, 4, 5, 6, 7});
  const double lc[] = {0.29335, 0.26103, 0.25333, 0.25107, 0.2504, 0.2501};
  const double ls[] = {1.6180, 2.2406, 2.8650, 3.4904, 4.1165, 4.7429};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].lambda_c, lc[i], 1e-4);
    EXPECT_NEAR(rows[i].lambda_s, ls[i], 1e-4);
  }
  EXPECT_NE(critical_csv({2}).find("2,0.293367,1.61803\n"), std::string::npos);
}

TEST(Critical, Repeatable) { EXPECT_EQ(critical_csv({2, 3, 9}), critical_csv({2, 3, 9})); }

TEST(Simulate, ZeroLambdaSummary) {
  const auto out = simulate({{2, 0.0}, StopRule{}, 200, 5, 0});
  EXPECT_EQ(out.summary["survival"]["p_hat"].get<double>(), 0.0);
  EXPECT_EQ(out.summary["survival"]["mean_total_born"].get<double>(), 1.0);
  EXPECT_EQ(first_line(runs_csv(out.records)),
            slurp(std::string(MASSEXT_TEST_DATA) + "/runs_header.csv"));
}

TEST(Simulate, SubcriticalWilsonUpperBound) {
  const auto out = simulate({{2, 0.2}, StopRule{}, 10'000, 6, 0});
  const json& s = out.summary["survival"];
  EXPECT_EQ(s["p_hat"].get<double>(), 0.0);
  EXPECT_LT(s["wilson_95"][1].get<double>(), 0.001);
}

TEST(Simulate, UnwritablePathNamesPath) {
  try {
    write_text("/nonexistent_dir/out.json", "x");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir/out.json"), std::string::npos);
  }
}

TEST(StopRuleJson, NullDisablesAndRoundTrips) {
  const StopRule s = stop_rule_from_json(json::parse(R"({"max_live_particles": null, "max_time": 5})"));
  EXPECT_FALSE(s.max_live_particles);
  EXPECT_EQ(s.max_time, 5.0);
  EXPECT_EQ(s.max_events, StopRule{}.max_events);
  EXPECT_EQ(stop_rule_from_json(to_json(s)), s);
  EXPECT_THROW(stop_rule_from_json(json::parse(
                   R"({"max_time": null, "max_live_particles": null, "max_type_born": null, "max_events": null})")),
               std::invalid_argument);
}

TEST(Sweep, EmptyTargetsRejected) {
  SweepSpec spec;
  spec.lambdas = {1.0};
  spec.targets = {};
  try {
    run_sweep(spec);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "no targets selected");
  }
}

TEST(Sweep, GridFromJson) {
  const SweepSpec spec = sweep_spec_from_json(json::parse(slurp(std::string(MASSEXT_TEST_DATA) + "/sweep_config.json")));
  EXPECT_EQ(spec.lambdas, (std::vector<double>{0.5, 1.0, 1.5}));
  EXPECT_EQ(spec.n_replicas, 400u);
  EXPECT_EQ(spec.master_seed, 2024u);
  EXPECT_EQ(spec.stop.max_live_particles, 2000u);
  EXPECT_THROW(lambda_range(0.1, 1.0, 0), std::invalid_argument);
  EXPECT_EQ(lambda_range(0.3, 0.3, 1), std::vector<double>{0.3});
}

TEST(Sweep, IntermediatePhaseAndOrdering) {
  SweepSpec spec;
  spec.d_values = {2};
  spec.lambdas = {1.5, 0.5, 1.0};
  spec.n_replicas = 2000;
  spec.stop = StopRule{std::nullopt, 5'000, 1'000, 1'000'000};
  spec.chain_max_steps = 100'000;
  spec.targets = {kTargetBranch, kTargetTree, kTargetCritical};
  spec.master_seed = 8;
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_LE(std::tie(rows[i - 1].d, rows[i - 1].lambda, rows[i - 1].target),
              std::tie(rows[i].d, rows[i].lambda, rows[i].target));
  for (const auto& r : rows) {
    EXPECT_LE(r.ci_lo, r.estimate);
    EXPECT_LE(r.estimate, r.ci_hi);
    if (r.target == kTargetTree) EXPECT_GT(r.estimate, 0.0) << r.lambda;
    if (r.target == kTargetBranch) EXPECT_EQ(r.estimate, 1.0) << r.lambda;
  }
  EXPECT_EQ(first_line(rows_csv(rows)), slurp(std::string(MASSEXT_TEST_DATA) + "/sweep_header.csv"));
}

TEST(Sweep, BranchGamblersRuinInsideCi) {
  SweepSpec spec;
  spec.lambdas = {3.0};
  spec.n_replicas = 20'000;
  spec.chain_max_steps = 10'000;
  spec.targets = {kTargetBranch};
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LE(rows[0].ci_lo, 11.0 / 21.0);
  EXPECT_GE(rows[0].ci_hi, 11.0 / 21.0);
}

TEST(Sweep, NoSubstreamCollisions) {
  SweepSpec spec;
  spec.d_values = {2, 3, 4};
  spec.lambdas = lambda_range(0.1, 2.0, 20);
  spec.n_replicas = 500;
  spec.targets = {kTargetTree, kTargetBranch};
  const auto seeds = sweep_replica_seeds(spec);
  EXPECT_EQ(seeds.size(), 3u * 20u * 500u * 2u);
  EXPECT_EQ(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size(), seeds.size());
}

TEST(Oracle, OneStepMatchesPUp) {
  OracleOptions opt;
  opt.d = 2;
  opt.lambda = 0.25;
  opt.k = 1;
  opt.n_samples = 200'000;
  const json r = oracle_report(opt);
  EXPECT_TRUE(r["one_step"]["within_ci"].get<bool>());
}

TEST(Oracle, DriftHypothesisGuard) {
  OracleOptions opt;
  opt.d = 2;
  opt.lambda = 2.0;
  EXPECT_THROW(oracle_report(opt), PreconditionError);
}

TEST(Oracle, AnalyticRateAtCriticality) {
  OracleOptions opt;
  opt.lambda = solve_lambda_c(2).value;
  opt.k = 3;
  opt.n_samples = 10'000;
  EXPECT_NEAR(oracle_report(opt)["analytic_rate"].get<double>(), -0.6931, 1e-4);
}

// --- end-to-end through the executable ------------------------------------

TEST(Cli, CriticalDefaultTable) {
  const fs::path out = scratch("critical.csv");
  ASSERT_EQ(cli("critical --out " + out.string()), 0);
  const auto rows = parse_csv(slurp(out));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[1][0], "2");
  EXPECT_EQ(rows[1][2], "1.61803");
}

TEST(Cli, SimulateByteIdenticalAcrossRunsAndThreads) {
  const fs::path a = scratch("sim_a.json"), b = scratch("sim_b.json");
  const fs::path ra = scratch("runs_a.csv"), rb = scratch("runs_b.csv");
  const fs::path ta = scratch("trace_a.txt"), tb = scratch("trace_b.txt");
  const std::string args = "simulate --d 2 --lambda 0.9 --replicas 300 --seed 41 --max-live 3000 ";
  ASSERT_EQ(cli(args + "--threads 1 --out " + a.string() + " --runs " + ra.string() +
                " --trace " + ta.string()),
            0);
  ASSERT_EQ(cli(args + "--threads 3 --out " + b.string() + " --runs " + rb.string() +
                " --trace " + tb.string()),
            0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(ra), slurp(rb));
  EXPECT_EQ(slurp(ta), slurp(tb));
  EXPECT_EQ(first_line(slurp(ta)), "event_index,time,kind,type,vertex\n");
  EXPECT_EQ(json::parse(slurp(a))["replicas"].get<int>(), 300);
}

TEST(Cli, ConfigWithFlagOverride) {
  const fs::path cfg = scratch("sim_cfg.json");
  write_text(cfg.string(), R"({"d": 3, "lambda": 0.0, "n_replicas": 50, "master_seed": 9})");
  const fs::path out = scratch("sim_cfg_out.json");
  ASSERT_EQ(cli("simulate --config " + cfg.string() + " --replicas 20 --out " + out.string()), 0);
  const json j = json::parse(slurp(out));
  EXPECT_EQ(j["d"].get<int>(), 3);
  EXPECT_EQ(j["replicas"].get<int>(), 20);
  EXPECT_EQ(j["master_seed"].get<int>(), 9);
}

TEST(Cli, SweepFromConfig) {
  const fs::path out = scratch("sweep.csv");
  ASSERT_EQ(cli("sweep --config " + std::string(MASSEXT_TEST_DATA) + "/sweep_config.json --out " +
                out.string()),
            0);
  const auto rows = parse_csv(slurp(out));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[1][2], "branch_extinction");
  EXPECT_EQ(rows[2][2], "tree_survival");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("simulate --d 2 --lambda 0.5 --replicas 5 --out /nonexistent_dir/x.json"), 3);
  EXPECT_EQ(cli("oracle --d 2 --lambda 2 --k 3"), 4);
  EXPECT_EQ(cli("simulate --d 0 --lambda 0.5"), 2);
  EXPECT_EQ(cli("sweep --lambda 1 --targets bogus"), 2);
  EXPECT_EQ(cli("no-such-command"), 2);
  EXPECT_EQ(cli("simulate --config /nonexistent_dir/cfg.json"), 3);
}

TEST(Cli, BranchAndOracleReports) {
  const fs::path b = scratch("branch.json"), o = scratch("oracle.json");
  ASSERT_EQ(cli("branch --d 2 --lambda 3 --replicas 20000 --max-steps 10000 --out " + b.string()), 0);
  const json bj = json::parse(slurp(b));
  EXPECT_NEAR(bj["extinction_prob_analytic"].get<double>(), 11.0 / 21.0, 1e-12);
  EXPECT_LE(bj["wilson_95"][0].get<double>(), 11.0 / 21.0);
  EXPECT_GE(bj["wilson_95"][1].get<double>(), 11.0 / 21.0);

  ASSERT_EQ(cli("oracle --d 2 --lambda 0.2 --k 2 --samples 50000 --engine-crosscheck --out " +
                o.string()),
            0);
  const json oj = json::parse(slurp(o));
  EXPECT_TRUE(oj["engine_crosscheck"]["overlap_3sigma"].get<bool>());
}
