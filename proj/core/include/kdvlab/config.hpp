#pragma once

#include <map>
#include <string>
#include <vector>

#include "kdvlab/model.hpp"
#include "kdvlab/solver.hpp"

namespace kdvlab {

/// Flat dotted-key experiment configuration (grid.N, weights.sigma, ...).
/// Parsed from hand-editable key = value text; numeric validation reports
/// the offending key, line and constraint.
struct ExperimentConfig {
  std::string preset = "custom";  // kdv | kdvb | linear-gevrey | custom

  double grid_L = 20.0;
  int grid_N = 256;
  double grid_h = 1.0;

  double sigma = 0.75;
  double theta = 1.6;
  double mu = 0.0;
  double M2 = 0.0;
  double M1 = 0.0;
  double k = 0.0;
  double rho_prime = 0.0;
  bool auto_constants = false;
  std::vector<double> deltas{0.05, 0.1, 0.2};

  double a3 = 1.0;
  std::vector<double> a3_samples;  // optional; linear-in-t interpolation
  cplx alpha[3] = {cplx(0.0), cplx(0.0), cplx(0.0)};
  std::string b_spec[3] = {"zero", "zero", "zero"};
  double decay[3] = {-1.0, -1.0, -1.0};  // -1 selects j*sigma/2
  double window_inner = 0.45;
  double window_outer = 0.60;
  double window_floor = 1e-9;
  double theta0 = 1.4;

  std::string mode = "linear";  // linear | conjugated | quasilinear
  double T = 1.0;
  double dt = 1e-3;
  double work_m = 0.0;
  double work_rho = 0.2;
  double delta_work = 0.0;
  double tol = 1e-8;
  int max_iters = 10;
  double window = 0.0;

  std::string init_kind = "zero";  // zero | sech | sech2 | gauss | mode
  double init_amplitude = 0.0;
  double init_scale = 1.0;
  int init_mode_k = 1;

  std::vector<double> neccond_rho{1, 2, 4, 8, 16};

  long seed = 1;
  int threads = 1;

  bool operator==(const ExperimentConfig&) const;

  CoefficientModel build_model() const;
  GridSpec build_grid() const;
  WeightParams build_weights() const;
  SolveConfig build_solve_config() const;
  GridFunction build_initial(const GridSpec& g) const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace kdvlab
