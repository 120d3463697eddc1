// kinkopt command-line front-end: scenario configs in, reports out.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kinkopt/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Nonsmooth quasilinear optimal control: solvers, level-set geometry and "
      "second-order condition checks"};
  app.require_subcommand(0, 1);

  const std::vector<std::string> commands = {
      "solve-state", "solve-ocp",  "extract-levelset", "verify-green",      "jump-functional",
      "an-limits",   "curvature",  "check-soc",        "convergence-study",
  };

  std::string config, out_dir = "out", study_sub;
  int levels = -1;
  unsigned seed = 42;

  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name, "");
    if (name == "convergence-study")
      sub->add_option("subcommand", study_sub, "command to re-run over refinement levels")
          ->required();
    sub->add_option("--config", config, "scenario name or JSON config path")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--levels", levels, "refinement levels (study) / level+1 (single runs)");
    sub->add_option("--seed", seed, "rng seed for sampled directions");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    // CLI11 treats --help as success; anything else is a usage error
    return rc == 0 ? 0 : (e.get_name() == "RequiredError" ? 2 : 1);
  }

  auto subs = app.get_subcommands();
  if (subs.empty()) {
    std::cerr << app.help();
    return 1;
  }
  return kinkopt::scenario::run(subs[0]->get_name(), study_sub, config, out_dir, levels, seed);
}
