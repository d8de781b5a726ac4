#include "fracnull/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace fracnull::cli {
namespace {

RunConfig parse(const std::string& text, const std::vector<std::string>& overrides = {},
                const std::string& scenario = "diffusion") {
  std::istringstream is(text);
  return parse_config(is, "case.ini", overrides, scenario);
}

/// Message of the ConfigError thrown by `f`, or "" when nothing is thrown.
template <typename F>
std::string config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fracnull_cli_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

GTEST_TEST(ConfigTest, SectionsCommentsAndOrigins) {
  const RunConfig c = parse(
      "# leading comment\n"
      "[model]\n"
      "alpha = 0.8   ; trailing comment\n"
      "n_x=16\n"
      "\n"
      "[run]\n"
      "cascade = 4, 16\n"
      "[band]\n"
      "  preset = sinband\n",
      {"model.n_t=64"});
  EXPECT_EQ(c.alpha, 0.8);
  EXPECT_EQ(c.n_x, 16);
  EXPECT_EQ(c.n_t, 64);
  EXPECT_EQ(c.band, "sinband");
  EXPECT_EQ(c.origin.at("model.alpha"), "case.ini:3");
  EXPECT_EQ(c.origin.at("band.preset"), "case.ini:9");
  EXPECT_EQ(c.origin.at("model.n_t"), "--override #1");
}

GTEST_TEST(ConfigTest, OverridesWinOverFile) {
  const RunConfig c = parse("[model]\nalpha = 0.8\n", {"model.alpha=0.9"});
  EXPECT_EQ(c.alpha, 0.9);
}

GTEST_TEST(ConfigTest, ErrorsNameTheLine) {
  EXPECT_TRUE(contains(config_error([] { parse("[band]\nm = 1\nbogus = 2\n"); }),
                       "case.ini:3: unknown key 'bogus' in section [band]"));
  EXPECT_TRUE(contains(config_error([] { parse("[nope]\n"); }), "case.ini:1: unknown section [nope]"));
  EXPECT_TRUE(contains(config_error([] { parse("[model]\nalpha = 0.7\nalpha = 0.8\n"); }),
                       "case.ini:3: duplicate key 'alpha' (first set at case.ini:2)"));
  EXPECT_TRUE(contains(config_error([] { parse("[model]\nalpha 0.7\n"); }), "case.ini:2: expected key = value"));
  EXPECT_TRUE(contains(config_error([] { parse("alpha = 0.7\n"); }), "case.ini:1: key outside of any section"));
  EXPECT_TRUE(contains(config_error([] { parse("[model\n"); }), "case.ini:1: unterminated section header"));
  EXPECT_TRUE(contains(config_error([] { parse("[model]\n\nn_t = many\n"); }), "case.ini:3"));
  EXPECT_TRUE(contains(config_error([] { parse("[model]\nrule = simpson\n"); }), "case.ini:2"));
  EXPECT_TRUE(contains(config_error([] { parse("[run]\nscenario = weird\n"); }), "case.ini:2: unknown scenario"));
  EXPECT_TRUE(contains(config_error([] { parse("", {"bandm=1"}); }), "--override #1"));
  EXPECT_TRUE(contains(config_error([] { parse("", {"band.bogus=1"}); }), "--override #1: unknown key 'bogus'"));
}

GTEST_TEST(ConfigTest, ValidationNamesTheOrigin) {
  EXPECT_TRUE(contains(config_error([] { parse("[model]\nalpha = 0.4\n"); }), "case.ini:2"));
  EXPECT_TRUE(contains(config_error([] { parse("[model]\nalpha = 0.7\np = 1.2\n"); }), "case.ini:3"));
  EXPECT_TRUE(contains(config_error([] { parse("[run]\ncascade = 16, 8\n"); }), "case.ini:2: levels must be increasing"));
  EXPECT_TRUE(contains(config_error([] { parse("[run]\ncascade = 8, 128\n"); }), "levels must lie in [1, n_x]"));
  EXPECT_TRUE(contains(config_error([] { parse("[nonlocal]\nkind = point\nc = 0.5\n"); }),
                       "case.ini:3: c != 0 violates the sublinear growth condition"));
  EXPECT_TRUE(config_error([] { parse("[nonlocal]\nkind = point\nc = 0.5\nallow_linear_growth = true\n"); }).empty());
  EXPECT_TRUE(contains(config_error([] { parse("[nonlocal]\nkind = box\nc = 1.0\nallow_linear_growth = true\n"); }),
                       "need |c| < 1"));
  EXPECT_TRUE(contains(config_error([] { parse("[memory]\nhorizon = 1\n"); }), "case.ini:2"));
}

GTEST_TEST(ConfigTest, Presets) {
  const RunConfig d = parse("");
  EXPECT_EQ(d.scenario, "diffusion");
  EXPECT_EQ(d.n_x, 64);
  EXPECT_EQ(d.n_t, 256);
  EXPECT_EQ(d.alpha, 0.75);
  EXPECT_EQ(d.cascade, (std::vector<int>{8, 16, 32, 64}));

  const RunConfig s = parse("", {}, "scalar");
  EXPECT_EQ(s.n_x, 1);
  EXPECT_EQ(s.generator, "scalar");
  EXPECT_EQ(s.band, "zero");

  const RunConfig m = parse("[run]\nscenario = memory\n");
  EXPECT_EQ(m.alpha, 0.5);
  EXPECT_EQ(m.p, 3.0);
  EXPECT_EQ(m.rule, "trapezoid");

  EXPECT_EQ(parse("", {"run.scenario=uncontrolled"}).control_map, "zero");
}

GTEST_TEST(ConfigTest, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/fracnull.ini", {}, "scalar"), ConfigError);
  EXPECT_NO_THROW(load_config("", {}, "scalar"));
}

GTEST_TEST(SynthTest, ScalarPresetReachesZero) {
  const CommandResult r = cmd_synth(parse("", {}, "scalar"));
  EXPECT_EQ(r.exit_code, kOk);
  ASSERT_TRUE(r.trajectory.has_value());
  EXPECT_LE(std::abs(r.trajectory->terminal()(0)), 1e-8);
  EXPECT_TRUE(contains(r.report.text(), "apriori check: PASS"));
}

GTEST_TEST(SynthTest, NoControlIsInfeasible) {
  const CommandResult r = cmd_synth(parse("", {}, "uncontrolled"));
  EXPECT_EQ(r.exit_code, kInfeasible);
  EXPECT_TRUE(contains(r.message, "gamma_hat = 0"));
}

GTEST_TEST(SynthTest, ExceptionClassification) {
  EXPECT_EQ(classify(ConfigError("x")), kConfigError);
  EXPECT_EQ(classify(InfeasibleError("x", 1.0)), kInfeasible);
  EXPECT_EQ(classify(PreconditionError("x")), kInfeasible);
  EXPECT_EQ(classify(NonConvergenceError("x")), kNonConvergence);
  EXPECT_EQ(classify(BlowUpError("x", {})), kNonConvergence);
  EXPECT_EQ(classify(std::invalid_argument("x")), kConfigError);
}

GTEST_TEST(SynthTest, IterationCapGivesNonConvergence) {
  const RunConfig c = parse("[model]\nn_x = 16\nn_t = 32\n[run]\ncascade = 16\n[solver]\nmax_iter = 1\n");
  try {
    cmd_synth(c);
    FAIL() << "expected non-convergence";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(classify(e), kNonConvergence);
  }
}

GTEST_TEST(DiffusionDemoTest, DefaultRunIsDeterministic) {
  const RunConfig c = parse("");
  const CommandResult a = cmd_demo_diffusion(c);
  const CommandResult b = cmd_demo_diffusion(c);
  EXPECT_EQ(a.exit_code, kOk) << a.report.text();
  EXPECT_EQ(a.report.text(), b.report.text());
  EXPECT_EQ(a.report.jsonl(), b.report.jsonl());
  const auto da = scratch("det_a"), db = scratch("det_b");
  write_csv(da, *a.trajectory, &*a.control);
  write_csv(db, *b.trajectory, &*b.control);
  EXPECT_EQ(slurp(da / "trajectory.csv"), slurp(db / "trajectory.csv"));
  EXPECT_EQ(slurp(da / "control.csv"), slurp(db / "control.csv"));

  // Machine records are one JSON object per line.
  std::istringstream lines(a.report.jsonl());
  std::string line;
  int cascade_rows = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    ASSERT_TRUE(j.contains("record"));
    if (j["record"] == "cascade") ++cascade_rows;
  }
  EXPECT_EQ(cascade_rows, 4);
}

GTEST_TEST(DiffusionDemoTest, LinearLimitNeedsFewerIterations) {
  Report r0, r1;
  const DiffusionOutcome lin = run_diffusion(parse("", {"band.m=0"}), r0);
  const DiffusionOutcome full = run_diffusion(parse(""), r1);
  EXPECT_TRUE(lin.terminal_ok);
  EXPECT_LT(lin.cascade.rows.back().iterations, full.cascade.rows.back().iterations);
}

GTEST_TEST(DiffusionDemoTest, TopLevelOnlyMatchesCascade) {
  Report r0, r1;
  const DiffusionOutcome top = run_diffusion(parse("", {"run.cascade=64"}), r0);
  const DiffusionOutcome all = run_diffusion(parse(""), r1);
  ASSERT_EQ(top.cascade.rows.size(), 1u);
  EXPECT_EQ(top.cascade.rows[0].terminal_norm, all.cascade.rows.back().terminal_norm);
}

GTEST_TEST(DiffusionDemoTest, CsvReadBack) {
  const CommandResult r = cmd_demo_diffusion(parse("", {"model.n_x=16", "model.n_t=32", "run.cascade=16"}));
  ASSERT_EQ(r.exit_code, kOk);
  const auto dir = scratch("csv");
  write_csv(dir, *r.trajectory, &*r.control);
  std::ifstream tf(dir / "trajectory.csv");
  const Trajectory q = read_trajectory(tf);
  EXPECT_EQ(q.states, r.trajectory->states);
  std::ifstream uf(dir / "control.csv");
  EXPECT_EQ(read_control(uf, 2.0).values, r.control->values);
}

GTEST_TEST(MemoryDemoTest, ResurrectionAndOracle) {
  Report rep;
  const MemoryOutcome half = run_memory(parse("", {}, "memory"), rep);
  EXPECT_TRUE(half.ok);
  EXPECT_LE(half.terminal, 1e-6);
  EXPECT_GE(half.resurrection, 1e-3);
  EXPECT_LE(half.oracle_rel, 1e-4);
  EXPECT_TRUE(contains(rep.text(), "for alpha = 1"));

  Report rep2;
  const MemoryOutcome near_one = run_memory(parse("", {"model.alpha=0.999"}, "memory"), rep2);
  EXPECT_LT(near_one.resurrection, half.resurrection);

  EXPECT_EQ(cmd_demo_memory(parse("", {}, "memory")).exit_code, kOk);
  EXPECT_THROW(run_memory(parse("", {"band.preset=sinband"}, "memory"), rep), ConfigError);
}

GTEST_TEST(VerifyTest, SuiteAndFaultInjection) {
  const CommandResult all = cmd_verify(parse(""));
  EXPECT_EQ(all.exit_code, kOk) << all.report.text();
  EXPECT_EQ(all.report.text().find("FAIL"), std::string::npos);

  const CommandResult fault = cmd_verify(parse("", {"verify.checks=duality"}), true);
  EXPECT_EQ(fault.exit_code, kVerifyFailed);
  EXPECT_TRUE(contains(fault.message, "duality"));

  EXPECT_THROW(cmd_verify(parse("", {"verify.checks="})), ConfigError);
  EXPECT_THROW(cmd_verify(parse("", {"verify.checks=nonsense"})), ConfigError);
}

}  // namespace
}  // namespace fracnull::cli
