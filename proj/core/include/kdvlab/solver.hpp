#pragma once

#include <functional>
#include <vector>

#include "kdvlab/model.hpp"

namespace kdvlab {

struct CauchyData {
  GridFunction g;  // initial datum
  Trajectory f;    // forcing sampled on the solver nodes; empty => zero
  double T = 1.0;

  bool has_forcing() const { return !f.states.empty(); }
  GridFunction forcing_at(double t) const;
};

struct SolveConfig {
  double dt = 1e-3;
  GevreyIndex working{0.0, 0.0, 1.6};  // (m, rho, theta)
  double delta_work = 0.0;             // 0 selects rho/4
  std::vector<double> deltas{0.05, 0.1, 0.2};
  bool conjugated = false;
  double window = 0.0;  // quasilinear windowing; 0 = whole horizon
  double instability_guard = 1e6;

  int steps_for(double T) const;
  double work_delta() const {
    return delta_work > 0.0 ? delta_work : 0.25 * working.rho;
  }
};

struct SolveReport {
  Trajectory trajectory;                         // v on the nodes
  std::vector<double> sobolev_trace;             // H^m per node
  std::vector<std::vector<double>> gevrey_traces;  // per delta, per node
  std::vector<double> w_side_trace;              // conjugated runs: ||w||_H^m
  std::vector<double> residual_trace;            // quasilinear iterations
  double energy_ratio = 0.0;
  double t_star = 0.0;       // horizon actually covered
  int newton_iterations = 0;
  bool used_conjugation = false;
  WeightParams weights;      // parameters the run used (conjugated runs)
};

/// Cumulative time integral on uniform nodes, 4th order (cubic panels).
std::vector<GridFunction> cumulative_integral(const Trajectory& traj);
/// Node-wise time derivative, 4th-order five-point stencils.
Trajectory time_derivative(const Trajectory& traj);

/// Linear solve with coefficients frozen along u_freeze:
/// d_t v = -i [a3 D^3 + a2 D^2 + a1 D + a0] v + i f, v(0) = g.
/// Integrating-factor RK4: the x-independent a3 D^3 part is handled exactly
/// by the exponential factor, the rest explicitly.
SolveReport solve_linear(const CoefficientModel& model,
                         const Trajectory& u_freeze, const CauchyData& data,
                         const SolveConfig& cfg);

/// Same Cauchy problem solved through the change of variables: the data are
/// transformed by Q, the conjugated system for w is integrated (drift and
/// leading dispersion exact in the integrating factor), and v = Q^{-1} w is
/// pulled back per node.
SolveReport solve_conjugated(const CoefficientModel& model,
                             const Trajectory& u_freeze, const CauchyData& data,
                             const SolveConfig& cfg, const WeightParams& params);

/// Measured constant of the energy estimate: sup over nodes of
/// ||v(t)||^2_{(m, rho-delta)} / (||g||^2_{(m,rho)} + int_0^t ||f||^2).
double verify_energy(const SolveReport& report, const CauchyData& data,
                     const GevreyIndex& idx, double delta);

/// Integral-form residual J(u) = u - g + i int_0^t (P u) - i int_0^t f.
Trajectory residual_J(const CoefficientModel& model, const Trajectory& u_traj,
                      const CauchyData& data);

/// First-order Taylor seed w(t) = g - i t (P-spatial(0) g - f(0)).
Trajectory taylor_seed(const CoefficientModel& model, const CauchyData& data,
                       const SolveConfig& cfg);

/// Direct evaluation of the Frechet derivative
/// DJ(u) v = v + i int_0^t [a3 D^3 v + a2(u) D^2 v + a1(u) D v + a0-tilde v].
Trajectory apply_DJ(const CoefficientModel& model, const Trajectory& u_traj,
                    const Trajectory& v_traj);

/// Solution of DJ(u) v = h via the linearized Cauchy problem
/// (a0 replaced by a0-tilde, data (h(0), D_t h)).
Trajectory solve_DJ(const CoefficientModel& model, const Trajectory& u_traj,
                    const Trajectory& h_traj, const SolveConfig& cfg,
                    const WeightParams& params);

/// Newton-type quasilinear iteration u <- u - S(u, J(u)) on [0, T], with
/// window bisection when contraction fails; reports the largest covered
/// prefix and the residual history.
SolveReport solve_quasilinear(const CoefficientModel& model,
                              const CauchyData& data, const SolveConfig& cfg,
                              const WeightParams& params, int max_iters,
                              double tol);

/// phi_eps(t) = int_0^t rho(s/eps) (d_t J w)(s) ds with a smooth step rho
/// vanishing for s <= 1 and equal to 1 for s >= 2.
Trajectory mollify_residual(const CoefficientModel& model,
                            const Trajectory& w_traj, const CauchyData& data,
                            double eps);

}  // namespace kdvlab
