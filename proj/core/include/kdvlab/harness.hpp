#pragma once

#include <string>
#include <vector>

#include "kdvlab/config.hpp"

namespace kdvlab {

// Exit codes shared by the CLI: 0 ok, 1 config error, 2 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_verify(const ExperimentConfig& cfg, const std::string& suite,
               const std::string& out_dir);
int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, const std::string& out_dir,
              int threads);
int cmd_conjugate(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_neccond(const ExperimentConfig& cfg, const std::string& out_dir);

/// Apply a numeric override to a dotted config key (used by sweeps).
ExperimentConfig with_override(const ExperimentConfig& cfg,
                               const std::string& axis, double value);

}  // namespace kdvlab
