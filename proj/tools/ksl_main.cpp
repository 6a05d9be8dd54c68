// ksl: learning-curve theory, measure optimization and Monte Carlo checks for
// kernel regression under distribution shift.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "ksl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kernel regression generalization under shifted train/test measures"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  ksl::CommandLine cl;
  std::int64_t seed = -1;
  int threads = 0;

  const char* help[] = {
      "Mercer decomposition of the kernel under the training measure",
      "Theory learning curve over a P grid",
      "Monte Carlo kernel ridge regression learning curve",
      "Optimize the training measure against the theory error",
      "Optimize the test measure for a fixed training measure",
      "Closed-form learning curves (linear models, sphere stages)",
      "Per-degree spectrum of a dot-product kernel on the sphere",
      "Compare a theory curve with an empirical curve",
      "Finite-difference gradient checks",
      "Regenerate the data behind a bundled figure",
  };
  const auto& names = ksl::command_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", cl.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", cl.out_dir, "Output directory");
    sub->add_option("--seed", seed, "Master seed (overrides the config)")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--cache", cl.cache_dir, "Directory for cached decompositions");
    if (names[i] == "reproduce") {
      sub->add_option("figure", cl.figure, "Figure id")
          ->required()
          ->check(CLI::IsMember({"fig3a", "fig3b", "figSI3", "figSI4", "figSI5", "two_cluster"}));
    } else {
      sub->get_option("--config")->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ksl::exit_validation;
  }
  for (CLI::App* sub : app.get_subcommands()) cl.command = sub->get_name();
  if (seed >= 0) cl.seed = static_cast<std::uint64_t>(seed);
  if (threads > 0) cl.threads = threads;
  return ksl::run_command_line(cl, std::cerr);
}
