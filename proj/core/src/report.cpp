#include "kdvlab/report.hpp"

#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "kdvlab/errors.hpp"

namespace kdvlab {

namespace {

nlohmann::json config_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["preset"] = c.preset;
  j["grid"] = {{"L", c.grid_L}, {"N", c.grid_N}, {"h", c.grid_h}};
  j["weights"] = {{"sigma", c.sigma},   {"theta", c.theta},
                  {"mu", c.mu},         {"M2", c.M2},
                  {"M1", c.M1},         {"k", c.k},
                  {"rho_prime", c.rho_prime},
                  {"auto_constants", c.auto_constants},
                  {"deltas", c.deltas}};
  j["solve"] = {{"mode", c.mode},       {"T", c.T},
                {"dt", c.dt},           {"m", c.work_m},
                {"rho", c.work_rho},    {"tol", c.tol},
                {"max_iters", c.max_iters}, {"window", c.window}};
  j["init"] = {{"kind", c.init_kind},
               {"amplitude", c.init_amplitude},
               {"scale", c.init_scale}};
  j["seed"] = c.seed;
  return j;
}

}  // namespace

void write_solve_report_csv(std::ostream& os, const SolveReport& report,
                            const ExperimentConfig& cfg,
                            const std::optional<ChosenConstants>& constants) {
  nlohmann::json hdr = config_json(cfg);
  if (constants) {
    hdr["constants"] = {{"M2", constants->M2}, {"M1", constants->M1},
                        {"k", constants->k},   {"h0", constants->h0},
                        {"C_a3", constants->C_a3},
                        {"C_Omega", constants->C_Omega}};
  }
  hdr["t_star"] = report.t_star;
  hdr["energy_ratio"] = report.energy_ratio;
  hdr["newton_iterations"] = report.newton_iterations;
  hdr["used_conjugation"] = report.used_conjugation;
  os << "# " << hdr.dump() << "\n";

  os << "t,sobolev_m";
  for (double d : cfg.deltas) os << ",gevrey_rho_minus_" << d;
  const bool has_w = !report.w_side_trace.empty();
  if (has_w) os << ",w_side_sobolev";
  const bool has_res = !report.residual_trace.empty();
  if (has_res) os << ",residual";
  os << "\n";

  os.precision(17);
  const int n = report.trajectory.nodes();
  for (int i = 0; i < n; ++i) {
    os << report.trajectory.time_at(i);
    os << ',' << (i < static_cast<int>(report.sobolev_trace.size())
                      ? report.sobolev_trace[i]
                      : 0.0);
    for (const auto& tr : report.gevrey_traces)
      os << ',' << (i < static_cast<int>(tr.size()) ? tr[i] : 0.0);
    if (has_w)
      os << ','
         << (i < static_cast<int>(report.w_side_trace.size())
                 ? report.w_side_trace[i]
                 : 0.0);
    if (has_res)
      os << ','
         << (i < static_cast<int>(report.residual_trace.size())
                 ? report.residual_trace[i]
                 : 0.0);
    os << "\n";
  }
}

void write_solve_report_csv(const std::string& path, const SolveReport& report,
                            const ExperimentConfig& cfg,
                            const std::optional<ChosenConstants>& constants) {
  std::ofstream os(path);
  if (!os) throw Error("write_solve_report_csv: cannot open " + path);
  write_solve_report_csv(os, report, cfg, constants);
}

}  // namespace kdvlab
