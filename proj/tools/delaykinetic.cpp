#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "delaykinetic/cli.hpp"

int main(int argc, char** argv) {
  using namespace delaykinetic;
  CLI::App app{"Delayed interaction kinetics: particle simulations, mean-field solvers and studies"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config's 'output')");
  run->add_flag("--verbose", verbose, "Log progress to stderr");

  app.add_subcommand("describe-models", "List the builtin interaction models");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("describe-models")) {
    cli::describe_models(std::cout);
    return EXIT_SUCCESS;
  }

  cli::ExperimentConfig config;
  try {
    config = cli::load_config(config_path);
  } catch (const Error& e) {
    return cli::fail_early(e, out_dir.empty() ? "." : out_dir, std::cerr);
  }
  if (!out_dir.empty()) config.output = out_dir;
  return cli::run(config, config.output, verbose, std::cerr);
}
