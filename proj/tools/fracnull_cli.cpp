// Command-line front end: `fracnull <synth|demo-diffusion|demo-memory|verify>`.
//
// Exit codes: 0 success, 1 configuration error, 2 infeasible or target
// missed, 3 non-convergence, 4 verification failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fracnull/cli.hpp"

namespace {

namespace fc = fracnull::cli;

struct Options {
  std::string config;
  std::string out = ".";
  std::vector<std::string> overrides;
  std::string checks;
  bool checks_given = false;
  bool inject_fault = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Scenario file (sectioned key = value)");
  cmd->add_option("--out", o.out, "Output directory for reports and CSV files");
  cmd->add_option("--override", o.overrides, "section.key=value, applied after the file")
      ->take_all();
}

int run(const std::string& name, const Options& o) {
  static const std::map<std::string, std::string> kDefaultScenario = {
      {"synth", "scalar"},
      {"demo-diffusion", "diffusion"},
      {"demo-memory", "memory"},
      {"verify", "diffusion"}};
  fc::RunConfig cfg = fc::load_config(o.config, o.overrides, kDefaultScenario.at(name));
  if (o.checks_given) {
    cfg.checks = fc::detail::split_list(o.checks);
    cfg.checks_given = true;
    cfg.origin["verify.checks"] = "--checks";
  }

  fc::CommandResult res;
  if (name == "synth") {
    res = fc::cmd_synth(cfg);
  } else if (name == "demo-diffusion") {
    res = fc::cmd_demo_diffusion(cfg);
  } else if (name == "demo-memory") {
    res = fc::cmd_demo_memory(cfg);
  } else {
    res = fc::cmd_verify(cfg, o.inject_fault);
  }
  res.report.kv("exit code", std::to_string(res.exit_code));

  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  res.report.write(dir);
  if (res.trajectory) fc::write_csv(dir, *res.trajectory, res.control ? &*res.control : nullptr);
  std::cout << res.report.text();
  std::cerr << name << ": " << res.message << "\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Null controllability of fractional evolution inclusions"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::string> names = {"synth", "demo-diffusion", "demo-memory", "verify"};
  const std::map<std::string, std::string> help = {
      {"synth", "Synthesize a null control for the configured scenario"},
      {"demo-diffusion", "Semilinear diffusion demo with the projection cascade"},
      {"demo-memory", "Null control at nu, then the zero-control extension past nu"},
      {"verify", "Run the invariant suite"}};
  for (const auto& n : names) {
    CLI::App* cmd = app.add_subcommand(n, help.at(n));
    add_common(cmd, o);
    if (n == "verify") {
      cmd->add_option("--checks", o.checks, "Comma-separated check names (default: all)");
      cmd->add_flag("--inject-fault", o.inject_fault)->group("");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fc::kConfigError;
  }
  for (const auto& n : names) {
    CLI::App* cmd = app.get_subcommand(n);
    if (!cmd->parsed()) continue;
    o.checks_given = n == "verify" && cmd->count("--checks") > 0;
    try {
      return run(n, o);
    } catch (const std::exception& e) {
      std::cerr << n << ": error: " << e.what() << "\n";
      return fc::classify(e);
    }
  }
  return fc::kConfigError;
}
