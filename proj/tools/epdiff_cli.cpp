#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "epdiff/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral EPDiff laboratory on the flat torus"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Execute the pipeline described by an experiment file");
  run->add_option("config", run_config, "INI experiment file")->required();

  std::string conv_config;
  auto* conv = app.add_subcommand("convergence", "Run the dt or N ladder of an experiment file");
  conv->add_option("config", conv_config, "INI experiment file")->required();

  epdiff::VerifyOptions vopt;
  std::optional<std::string> suite;
  auto* verify = app.add_subcommand("verify", "Run the property suites");
  verify->add_option("--seed", vopt.seed, "Random seed")->required();
  verify->add_option("--suite", suite, "Run a single suite");
  verify->add_option("--n", vopt.n, "Points per axis of the one-dimensional grids");
  verify->add_option("--order", vopt.order, "Highest commutator order (1 or 2)");
  verify->add_option("--instances", vopt.instances, "Random instances per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : epdiff::kExitValidation;
  }

  epdiff::RunOutcome out;
  if (*run) {
    out = epdiff::run_experiment(run_config);
  } else if (*conv) {
    out = epdiff::run_convergence(conv_config);
  } else {
    out = epdiff::run_verify(vopt, suite);
  }
  std::cout << out.json;
  return out.exit_code;
}
