// Command-line front end: run a scenario, sweep update rates, or run the
// verification suite. All the work lives in sfw/cli_commands.hpp.

#include "sfw/cli_commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Entropic transport solver with convex functional cost"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Build the scenario from a config file and run the flow");
  run->add_option("config", config_path, "Scenario config file")->required();
  run->add_option("--out", out_dir, "Output directory (trace.csv, summary.json, manifest.json)");
  run->add_option("--set", overrides, "Override a config key, e.g. --set solver.alpha=0.01");

  std::string sweep_config;
  std::string sweep_out = "sweep";
  std::string alphas_arg;
  auto* sweep = app.add_subcommand("sweep", "Run the flow once per update rate and report the "
                                            "rescaled-gap collapse");
  sweep->add_option("config", sweep_config, "Scenario config file")->required();
  sweep->add_option("--alphas", alphas_arg, "Comma-separated update rates, e.g. 0.01,0.02,0.04")
      ->required();
  sweep->add_option("--out", sweep_out, "Output directory");

  uint64_t seed = 20250401;
  std::string verify_out = "verify";
  bool corrupt_tilting = false;
  auto* verify = app.add_subcommand("verify", "Run the oracle and property suite");
  verify->add_option("--seed", seed, "Seed for the randomized checks");
  verify->add_option("--out", verify_out, "Output directory for verify.json");
  verify->add_flag("--corrupt-tilting-sign", corrupt_tilting)->group("");  // test hook

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return sfw::cmd_run(config_path, out_dir, overrides);
  if (sweep->parsed()) {
    std::vector<double> alphas;
    std::stringstream ss(alphas_arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        alphas.push_back(std::stod(item));
      } catch (const std::exception&) {
        std::cerr << "config error: bad alpha '" << item << "'\n";
        return sfw::kExitError;
      }
    }
    return sfw::cmd_sweep(sweep_config, alphas, sweep_out);
  }
  return sfw::cmd_verify(seed, verify_out, corrupt_tilting);
}
