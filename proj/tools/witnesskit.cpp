// Command-line driver for the threshold experiments.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "witnesskit/experiments.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  bool optimize = false;
  std::vector<int> ks;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace witnesskit::cli;

  CLI::App app{"Noise thresholds for entanglement detection by fidelity witnesses"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Overrides ov;
  std::string chosen;
  for (const auto& name : experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", ov.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "base random seed");
    sub->add_option("--out", ov.out, "output directory");
    sub->add_option("--jobs", ov.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--optimize", ov.optimize, "also optimize witness tuples");
    sub->add_option("--k", ov.ks, "tuple sizes")->delimiter(',');
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::vector<std::string> command_line(argv, argv + argc);
  RunConfig cfg;
  try {
    cfg = load_config_file(chosen, ov.config);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.out) cfg.out = *ov.out;
    if (ov.jobs) cfg.jobs = *ov.jobs;
    if (ov.optimize) cfg.optimize = true;
    if (!ov.ks.empty()) cfg.ks = ov.ks;
    finalize_config(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    return run_experiment(cfg, command_line, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
