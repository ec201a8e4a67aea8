#include <CLI11.hpp>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kdvlab/errors.hpp"
#include "kdvlab/harness.hpp"

using namespace kdvlab;

int main(int argc, char** argv) {
  CLI::App app{"spectral laboratory for third-order dispersive evolution "
               "equations in Gevrey-Sobolev spaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  long seed = -1;
  int threads = 1;
  app.add_option("--config", config_path, "experiment configuration file")
      ->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--threads", threads, "sweep fan-out");

  auto* sim = app.add_subcommand("simulate", "run a solve and emit norm traces");
  auto* ver = app.add_subcommand("verify", "run a verification suite");
  std::string suite;
  ver->add_option("--suite", suite,
                  "weights | calculus | energy | faadibruno | neccond")
      ->required();
  auto* swp = app.add_subcommand("sweep", "sweep a numeric config axis");
  std::string axis;
  std::string values_csv;
  swp->add_option("--axis", axis, "dotted config key, e.g. grid.h")->required();
  swp->add_option("--values", values_csv, "comma-separated values")->required();
  auto* conj =
      app.add_subcommand("conjugate", "dump the assembled conjugated symbols");
  auto* nec = app.add_subcommand("neccond", "necessary-condition diagnostic");

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (seed >= 0) cfg.seed = seed;
  if (threads > 0) cfg.threads = threads;

  if (sim->parsed()) return cmd_simulate(cfg, out_dir);
  if (ver->parsed()) return cmd_verify(cfg, suite, out_dir);
  if (swp->parsed()) {
    std::vector<double> values;
    std::stringstream ss(values_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        values.push_back(std::stod(item));
      } catch (...) {
        std::cerr << "config error: malformed sweep value '" << item << "'\n";
        return kExitConfig;
      }
    }
    return cmd_sweep(cfg, axis, values, out_dir, cfg.threads);
  }
  if (conj->parsed()) return cmd_conjugate(cfg, out_dir);
  if (nec->parsed()) return cmd_neccond(cfg, out_dir);
  return kExitConfig;
}
