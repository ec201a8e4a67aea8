#include "kdvlab/harness.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "kdvlab/errors.hpp"
#include "kdvlab/report.hpp"
#include "kdvlab/weights.hpp"

namespace kdvlab {

namespace {

struct VerifyRow {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

void write_rows(const std::string& path, const std::vector<VerifyRow>& rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path);
  os << "name,measured,threshold,pass\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.name << ',' << r.measured << ',' << r.threshold << ','
       << (r.pass ? 1 : 0) << "\n";
}

SolveReport run_solve(const ExperimentConfig& cfg, const CoefficientModel& model,
                      const GridSpec& grid, ChosenConstants* constants_out) {
  SolveConfig scfg = cfg.build_solve_config();
  CauchyData data;
  data.g = cfg.build_initial(grid);
  data.T = cfg.T;
  WeightParams wp = cfg.build_weights();
  Trajectory frozen = Trajectory::constant(data.g, 0.0, cfg.T, 1);

  if (cfg.mode == "quasilinear") {
    SolveReport rep = solve_quasilinear(model, data, scfg, wp, cfg.max_iters,
                                        cfg.tol);
    return rep;
  }
  if (cfg.mode == "conjugated") {
    if (cfg.auto_constants) {
      ChosenConstants cc = choose_constants(model, data.g, wp);
      wp.M2 = cc.M2;
      wp.M1 = cc.M1;
      wp.k = cc.k;
      wp.h = cc.h0;
      if (constants_out) *constants_out = cc;
    }
    return solve_conjugated(model, frozen, data, scfg, wp);
  }
  return solve_linear(model, frozen, data, scfg);
}

}  // namespace

ExperimentConfig with_override(const ExperimentConfig& cfg,
                               const std::string& axis, double value) {
  std::string text = serialize_config(cfg);
  std::ostringstream os;
  os.precision(17);
  os << text << axis << " = " << value << "\n";
  return parse_config(os.str());
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
  try {
    CoefficientModel model = cfg.build_model();
    GridSpec grid = cfg.build_grid();
    ChosenConstants constants{};
    SolveReport rep = run_solve(cfg, model, grid, &constants);
    std::optional<ChosenConstants> cc;
    if (cfg.auto_constants) cc = constants;
    write_solve_report_csv(out_dir + "/trace.csv", rep, cfg, cc);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

namespace {

std::vector<VerifyRow> verify_weights_suite(const ExperimentConfig& cfg) {
  std::vector<VerifyRow> rows;
  for (double sigma : {0.6, 0.75, 0.9}) {
    WeightParams p = cfg.build_weights();
    p.sigma = sigma;
    const double cap = 1.0 / (2.0 * (1.0 - sigma));
    if (!(p.theta > 1.0 && p.theta < cap)) p.theta = 0.5 * (1.0 + cap);
    p.mu = 0.0;
    p.M2 = p.M2 > 0 ? p.M2 : 1.0;
    p.M1 = p.M1 > 0 ? p.M1 : 1.0;
    p.h = std::max(p.h, 4.0);
    for (auto which : {WhichLambda::Lambda2, WhichLambda::Lambda1}) {
      auto r = verify_lambda_estimates(which, p, +1, 3, 3);
      const std::string base =
          (which == WhichLambda::Lambda2 ? "lambda2" : "lambda1");
      const std::string tag = base + "_sigma" + std::to_string(sigma);
      rows.push_back({tag + "_part_i_C", r.part_i.fitted_C, 1e6,
                      r.part_i.finite && r.part_i.fitted_C < 1e6});
      rows.push_back({tag + "_part_ii_C", r.part_ii.fitted_C, 1e6,
                      r.part_ii.finite && r.part_ii.fitted_C < 1e6});
      rows.push_back({tag + "_order0_C", r.order_zero.fitted_C, 1e6,
                      r.order_zero.finite && r.order_zero.fitted_C < 1e6});
    }
  }
  return rows;
}

std::vector<VerifyRow> verify_calculus_suite(const ExperimentConfig& cfg) {
  std::vector<VerifyRow> rows;
  GridSpec g(2.0, std::min(cfg.grid_N, 128));
  WeightParams p = cfg.build_weights();
  p.M2 = p.M2 > 0 ? p.M2 : 1.0;
  p.M1 = p.M1 > 0 ? p.M1 : 1.0;
  auto sweep = sweep_inversion_h(g, p, +1, 4.0, 64.0);
  const auto& last = sweep.back();
  rows.push_back({"neumann_h0", last.h, 64.0, last.r_norm < 0.5});
  rows.push_back({"neumann_r_norm", last.r_norm, 0.5, last.r_norm < 0.5});
  WeightParams ph = p;
  ph.h = last.h;
  auto inv = invert_e_lambda(g, ph, +1);
  rows.push_back({"neumann_residual", inv.residual, 1e-6, inv.residual <= 1e-6});
  return rows;
}

std::vector<VerifyRow> verify_energy_suite(const ExperimentConfig& cfg) {
  std::vector<VerifyRow> rows;
  CoefficientModel model = cfg.build_model();
  GridSpec grid = cfg.build_grid();
  ExperimentConfig c1 = cfg;
  c1.mode = "conjugated";
  ChosenConstants cc{};
  SolveReport rep = run_solve(c1, model, grid, &cc);
  ExperimentConfig c2 = c1;
  c2.dt = 0.5 * c1.dt;
  SolveReport rep2 = run_solve(c2, model, grid, nullptr);
  CauchyData data;
  data.g = cfg.build_initial(grid);
  data.T = cfg.T;
  const GevreyIndex idx(cfg.work_m, cfg.work_rho, cfg.theta);
  double prev = 1e300;
  for (double d : cfg.deltas) {
    const double r1 = verify_energy(rep, data, idx, d);
    const double r2 = verify_energy(rep2, data, idx, d);
    const double drift = std::abs(r2 - r1) / std::max(r1, 1e-300);
    std::ostringstream nm;
    nm << "energy_ratio_delta" << d;
    rows.push_back({nm.str(), r1, 1e300, std::isfinite(r1)});
    rows.push_back({nm.str() + "_dt_stability", drift, 0.10, drift <= 0.10});
    rows.push_back({nm.str() + "_monotone", r1, prev, r1 <= prev * (1 + 1e-12)});
    prev = r1;
  }
  return rows;
}

std::vector<VerifyRow> verify_faadibruno_suite(const ExperimentConfig& cfg) {
  std::vector<VerifyRow> rows;
  GridSpec grid = cfg.build_grid();
  GridFunction u = sample(grid, [](double x) {
    return cplx(0.1 / std::cosh(x), 0.0);
  });
  for (auto kind : {BFactor::monomial(2), BFactor::exp_w()}) {
    CoefficientModel m = cfg.build_model();
    m.term[2].alpha = [](double) { return cplx(1.0, 0.0); };
    m.term[2].decay = m.sigma;
    m.term[2].b = kind;
    auto rep = coefficient_derivative_bound_check(m, u, 1.0, 6);
    const std::string nm = kind.kind == BFactor::Kind::Power
                               ? "faadibruno_w2_C"
                               : "faadibruno_expw_C";
    rows.push_back({nm, rep.fitted_C[2], 1e9,
                    std::isfinite(rep.fitted_C[2]) && rep.fitted_C[2] < 1e9});
    auto rep2 = coefficient_derivative_bound_check(m, u, 2.0, 6);
    rows.push_back({nm + "_monotone_B", rep2.fitted_C[2], rep.fitted_C[2],
                    rep2.fitted_C[2] <= rep.fitted_C[2] * (1 + 1e-12)});
  }
  return rows;
}

std::vector<VerifyRow> verify_neccond_suite(const ExperimentConfig& cfg) {
  std::vector<VerifyRow> rows;
  CoefficientModel model = cfg.build_model();
  GridSpec grid = cfg.build_grid();
  GridFunction u = cfg.build_initial(grid);
  auto rep = necessary_condition_scan(model, u, cfg.neccond_rho, cfg.T);
  rows.push_back({"neccond_log_residual", rep.log_fit_residual, 1e300, true});
  rows.push_back({"neccond_pow_residual", rep.pow_fit_residual, 1e300, true});
  const bool log_wins = rep.log_fit_residual <= rep.pow_fit_residual;
  // decay faster than or equal to <x>^{-1} supports the log bound; slower
  // decay violates the condition and the power law should win
  const bool expect_log = model.term[2].decay >= 1.0 - 1e-12;
  rows.push_back({"neccond_condition_1_8_holds", log_wins ? 1.0 : 0.0,
                  expect_log ? 1.0 : 0.0, log_wins == expect_log});
  return rows;
}

}  // namespace

int cmd_verify(const ExperimentConfig& cfg, const std::string& suite,
               const std::string& out_dir) {
  try {
    std::vector<VerifyRow> rows;
    if (suite == "weights")
      rows = verify_weights_suite(cfg);
    else if (suite == "calculus")
      rows = verify_calculus_suite(cfg);
    else if (suite == "energy")
      rows = verify_energy_suite(cfg);
    else if (suite == "faadibruno")
      rows = verify_faadibruno_suite(cfg);
    else if (suite == "neccond")
      rows = verify_neccond_suite(cfg);
    else
      throw ConfigError("verify: unknown suite '" + suite +
                        "' (weights|calculus|energy|faadibruno|neccond)");
    write_rows(out_dir + "/verify_" + suite + ".csv", rows);
    for (const auto& r : rows)
      if (!r.pass) return kExitNumerical;
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, const std::string& out_dir,
              int threads) {
  if (values.empty()) {
    std::cerr << "config error: sweep needs a nonempty value list\n";
    return kExitConfig;
  }
  struct Row {
    double value;
    bool ok = false;
    double t_star = 0.0, final_sobolev = 0.0, energy_ratio = 0.0,
           r_norm = -1.0, final_residual = -1.0;
    std::string error;
  };
  std::vector<Row> rows(values.size());

  auto run_one = [&](size_t idx) {
    Row r;
    r.value = values[idx];
    try {
      ExperimentConfig c = with_override(cfg, axis, values[idx]);
      CoefficientModel model = c.build_model();
      GridSpec grid = c.build_grid();
      SolveReport rep = run_solve(c, model, grid, nullptr);
      r.t_star = rep.t_star;
      r.final_sobolev =
          rep.sobolev_trace.empty() ? 0.0 : rep.sobolev_trace.back();
      if (!rep.residual_trace.empty())
        r.final_residual = rep.residual_trace.back();
      CauchyData data;
      data.g = c.build_initial(grid);
      data.T = c.T;
      const GevreyIndex idx2(c.work_m, c.work_rho, c.theta);
      if (!c.deltas.empty())
        r.energy_ratio = verify_energy(rep, data, idx2, c.deltas.front());
      WeightParams wp = c.build_weights();
      if (wp.M2 > 0.0 || wp.M1 > 0.0) {
        WeightFamily fam(wp, model.sign_a3(0.0), grid.half_length);
        Symbol plus = fam.exp_tilde_symbol(grid, +1);
        Symbol minus = fam.exp_tilde_symbol(grid, -1);
        Eigen::MatrixXcd rm = quantize_matrix(plus) *
                                  reverse_quantize_matrix(minus) -
                              nyquist_projector(grid);
        r.r_norm = operator_norm(rm);
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    rows[idx] = r;
  };

  const int nthreads = std::max(1, threads);
  for (size_t base = 0; base < values.size();
       base += static_cast<size_t>(nthreads)) {
    std::vector<std::future<void>> futs;
    for (size_t i = base;
         i < std::min(values.size(), base + static_cast<size_t>(nthreads)); ++i)
      futs.push_back(std::async(std::launch::async, run_one, i));
    for (auto& f : futs) f.get();
  }

  std::ofstream os(out_dir + "/sweep.csv");
  if (!os) {
    std::cerr << "cannot open sweep output\n";
    return kExitNumerical;
  }
  os << "axis,value,ok,t_star,final_sobolev,energy_ratio,neumann_r_norm,"
        "final_residual,error\n";
  os.precision(17);
  bool any_ok = false;
  for (const auto& r : rows) {
    any_ok = any_ok || r.ok;
    os << axis << ',' << r.value << ',' << (r.ok ? 1 : 0) << ',' << r.t_star
       << ',' << r.final_sobolev << ',' << r.energy_ratio << ',' << r.r_norm
       << ',' << r.final_residual << ',' << r.error << "\n";
  }
  return any_ok ? kExitOk : kExitNumerical;
}

int cmd_conjugate(const ExperimentConfig& cfg, const std::string& out_dir) {
  try {
    CoefficientModel model = cfg.build_model();
    GridSpec grid = cfg.build_grid();
    GridFunction u = cfg.build_initial(grid);
    WeightParams wp = cfg.build_weights();
    ChosenConstants cc{};
    if (cfg.auto_constants) {
      cc = choose_constants(model, u, wp);
      wp.M2 = cc.M2;
      wp.M1 = cc.M1;
      wp.k = cc.k;
      wp.h = cc.h0;
    }
    auto assembly = assemble_conjugated(model, u, wp, 0.5 * cfg.T);
    write_symbol_csv(assembly.block2, out_dir + "/block_a2.csv");
    write_symbol_csv(assembly.block1, out_dir + "/block_a1.csv");
    write_symbol_csv(assembly.block_tail, out_dir + "/block_tail.csv");
    write_symbol_csv(assembly.block_r0, out_dir + "/block_r0.csv");
    auto lb = verify_lower_bounds(assembly, model);
    const double cert = conjugation_certificate(model, u, assembly);
    std::vector<VerifyRow> rows;
    rows.push_back({"certificate_rel_residual", cert, 1e-3, cert <= 1e-3});
    rows.push_back({"min2_window", lb.min2_window, -1e-8,
                    lb.min2_window >= -1e-8});
    rows.push_back({"min1_window", lb.min1_window, -1e-8,
                    lb.min1_window >= -1e-8});
    rows.push_back({"min_sigma_window", lb.min_sigma_window, -1e-8,
                    lb.min_sigma_window >= -1e-8});
    rows.push_back({"min2_global", lb.min2_global, -1e300, true});
    rows.push_back({"garding_floor2", lb.floor2, -1e300, true});
    write_rows(out_dir + "/conjugate_summary.csv", rows);
    for (const auto& r : rows)
      if (!r.pass) return kExitNumerical;
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int cmd_neccond(const ExperimentConfig& cfg, const std::string& out_dir) {
  try {
    CoefficientModel model = cfg.build_model();
    GridSpec grid = cfg.build_grid();
    GridFunction u = cfg.build_initial(grid);
    auto rep = necessary_condition_scan(model, u, cfg.neccond_rho, cfg.T);
    std::ofstream os(out_dir + "/neccond.csv");
    if (!os) throw Error("cannot open neccond output");
    os << "# log_fit_M=" << rep.log_fit_M << ",log_fit_N=" << rep.log_fit_N
       << ",log_residual=" << rep.log_fit_residual
       << ",pow_c=" << rep.pow_fit_c
       << ",pow_residual=" << rep.pow_fit_residual
       << ",pow_exponent=" << rep.pow_exponent << "\n";
    os << "rho,S\n";
    os.precision(17);
    for (size_t i = 0; i < rep.rho.size(); ++i)
      os << rep.rho[i] << ',' << rep.s_values[i] << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace kdvlab
