// Batch front door: reads an experiment config, runs the seeded ensemble and
// emits the report bundle. Exit codes: 0 = all assertions passed, 1 = at
// least one asserted property failed (witnesses in the output), 2 = invalid
// config or I/O error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "riglab/riglab.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string seed_override;
  std::string out_override;
  std::string format_override;
};

int run_command(riglab::Command command, const CliOptions& opt) {
  riglab::ExperimentConfig cfg;
  try {
    std::ifstream f(opt.config_path);
    if (!f) throw riglab::ConfigError("cannot open config '" + opt.config_path + "'");
    riglab::json j = riglab::json::parse(f);
    cfg = riglab::ExperimentConfig::from_json(j);
    if (j.contains("command") && cfg.command != command)
      throw riglab::ConfigError("config command does not match the subcommand");
    cfg.command = command;
    if (!opt.seed_override.empty()) cfg.seed = std::stoull(opt.seed_override);
    if (!opt.out_override.empty()) cfg.output.path = opt.out_override;
    if (!opt.format_override.empty()) cfg.output.format = opt.format_override;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "riglab: invalid config: " << e.what() << "\n";
    return 2;
  }

  try {
    const riglab::ReportBundle bundle = riglab::run(cfg);
    if (cfg.output.path.empty())
      riglab::emit(bundle, std::cout, cfg.output.format);
    else
      riglab::emit(bundle, cfg.output.path, cfg.output.format);
    return bundle.all_passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "riglab: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded property suites for operators on rigged coordinate spaces"};
  app.require_subcommand(1);

  static const char* kCommands[] = {"verify", "yosida", "metric", "basis", "h2bound"};
  static const char* kDescriptions[] = {
      "embedding, adjoint and orthogonality checkers",
      "resolvent-approximator convergence tables",
      "bounded-transform metric axioms",
      "unit-norm biorthogonal basis checks",
      "H2 extension norm chain",
  };

  CliOptions opt;
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(kCommands[i], kDescriptions[i]);
    sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", opt.seed_override, "override the master seed");
    sub->add_option("--out", opt.out_override, "override the output path");
    sub->add_option("--format", opt.format_override, "override the output format (json|csv)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  return run_command(riglab::command_from_name(name), opt);
}
