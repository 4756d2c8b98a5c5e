// Command line front end: run / compare / gamma / partition subcommands over
// JSON experiment configs.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedsim/errors.hpp"
#include "fedsim/report.hpp"

namespace {

struct CommonArgs {
  std::vector<std::string> configs;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool multi_config) {
  auto* opt = cmd->add_option("--config", args.configs, "experiment config (JSON)")
                  ->required();
  if (!multi_config) opt->expected(1);
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "seed override");
}

std::vector<fedsim::report::ExperimentSpec> load_specs(const CommonArgs& args) {
  std::vector<fedsim::report::ExperimentSpec> specs;
  for (const std::string& path : args.configs) {
    auto spec = fedsim::report::parse_config(path);
    if (!args.out_dir.empty()) spec.out_dir = args.out_dir;
    if (args.seed) spec.fed.seed = *args.seed;
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated learning communication-efficiency simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, compare_args, gamma_args, partition_args;
  auto* run = app.add_subcommand("run", "run one experiment, emit metrics CSV");
  add_common(run, run_args, false);
  auto* compare =
      app.add_subcommand("compare", "run several experiments on one partition");
  add_common(compare, compare_args, true);
  auto* gamma =
      app.add_subcommand("gamma", "estimate sign-agreement probabilities");
  add_common(gamma, gamma_args, false);
  auto* partition =
      app.add_subcommand("partition", "export the client partition plan");
  add_common(partition, partition_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return fedsim::report::cmd_run(load_specs(run_args)[0]);
    if (compare->parsed())
      return fedsim::report::cmd_compare(load_specs(compare_args));
    if (gamma->parsed())
      return fedsim::report::cmd_gamma(load_specs(gamma_args)[0]);
    if (partition->parsed())
      return fedsim::report::cmd_partition(load_specs(partition_args)[0]);
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
