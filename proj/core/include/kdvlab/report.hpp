#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "kdvlab/config.hpp"
#include "kdvlab/solver.hpp"

namespace kdvlab {

/// Norm-trace CSV: a JSON-style header block with the configuration and
/// chosen constants, a documented column row, then one row per time node.
void write_solve_report_csv(std::ostream& os, const SolveReport& report,
                            const ExperimentConfig& cfg,
                            const std::optional<ChosenConstants>& constants);

void write_solve_report_csv(const std::string& path, const SolveReport& report,
                            const ExperimentConfig& cfg,
                            const std::optional<ChosenConstants>& constants);

}  // namespace kdvlab
