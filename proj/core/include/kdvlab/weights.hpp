#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <vector>

#include "kdvlab/quantize.hpp"
#include "kdvlab/symbol.hpp"

namespace kdvlab {

/// Parameter pack of the weight construction.
struct WeightParams {
  double sigma = 0.75;      // (1/2, 1)
  double theta = 1.6;       // theta0 <= theta < 1/(2(1-sigma))
  double mu = 0.0;          // (1, theta); 0 selects the default (1+theta)/2
  double M2 = 0.0;
  double M1 = 0.0;
  double k = 0.0;
  double h = 1.0;           // >= 1
  double rho_prime = 0.0;   // exponential radius of the regularizing factor
  double T = 1.0;
  double taper_inner = 0.55;  // torus taper window, fractions of L
  double taper_outer = 0.85;

  void validate() const;
  double mu_or_default() const { return mu > 0.0 ? mu : 0.5 * (1.0 + theta); }
};

/// The two Gevrey-mu cutoff profiles:
///   w(xi)  = 0 for |xi| <= 1,  -sign(a3) for |xi| >= 2,
///   psi(y) = 1 for |y| <= 1/2, 0 for |y| >= 1,
/// built from the transition step of the exp(-(1-y^2)^{-1/(mu-1)}) bump.
class CutoffPair {
 public:
  CutoffPair(double mu, int sign_a3);

  double w(double xi) const;
  double dw(double xi) const;
  double psi(double y) const;
  double dpsi(double y) const;

  /// Normalized transition: 0 for u <= -1, 1 for u >= 1.
  double transition(double u) const;
  double transition_d1(double u) const;
  double transition_d2(double u) const;

  double mu() const { return mu_; }
  int sign_a3() const { return sign_a3_; }

 private:
  double mu_;
  int sign_a3_;
  double norm_;                 // integral of the bump over (-1, 1)
  std::vector<double> tab_;     // cumulative integral lookup
  double bump(double y) const;  // exp(-(1-y^2)^{-q})
};

/// Point evaluators for lambda_2, lambda_1, their exact x-derivatives and
/// finite-difference xi/mixed derivatives.  All evaluation is grid-free.
///
/// The pure family realizes the line formulas verbatim.  Constructed with a
/// torus half-length it applies an even taper window W(x) (1 on the physics
/// window, smoothly 0 in a boundary collar): lambda is odd and saturates, so
/// the untapered weight jumps across the periodic seam and ruins the discrete
/// composition calculus.  The taper term lambda W' carries the same sign as
/// the drift term, so the lower-bound mechanism is unaffected.
class WeightFamily {
 public:
  WeightFamily(const WeightParams& p, int sign_a3);
  /// Torus-adapted family; all evaluators include the taper.
  WeightFamily(const WeightParams& p, int sign_a3, double torus_half_length);

  bool windowed() const { return torus_L_ > 0.0; }
  double window(double x) const;
  double window_d1(double x) const;
  double window_d2(double x) const;

  const WeightParams& params() const { return p_; }
  const CutoffPair& cutoffs() const { return cut_; }
  int sign_a3() const { return cut_.sign_a3(); }

  // lambda_2(x,xi) = M2 w(xi/h) int_0^x <y>^{-sigma} psi(<y>/<xi>_h^2) dy
  double lambda2(double x, double xi) const;
  // lambda_1(x,xi) = M1 w(xi/h) <xi>_h^{-1} int_0^x <y>^{-sigma/2} psi(.) dy
  double lambda1(double x, double xi) const;
  double lambda_tilde(double x, double xi) const;

  // Exact x-derivatives (the integrals differentiate away).
  double dx_lambda2(double x, double xi) const;
  double dxx_lambda2(double x, double xi) const;
  double dx_lambda1(double x, double xi) const;
  double dxx_lambda1(double x, double xi) const;
  double dx_lambda_tilde(double x, double xi) const;
  double dxx_lambda_tilde(double x, double xi) const;
  double d3x_lambda_tilde(double x, double xi) const;  // FD of dxx

  /// d_xi^alpha d_x^beta of lambda_tilde (alpha <= 4, beta <= 3), centered
  /// finite differences in xi over the exact-in-x evaluators.
  double mixed_lambda_tilde(double x, double xi, int alpha, int beta) const;
  double mixed_lambda2(double x, double xi, int alpha, int beta) const;
  double mixed_lambda1(double x, double xi, int alpha, int beta) const;

  /// Column of lambda values at grid points xs for one fixed xi, computed by
  /// incremental adaptive quadrature (cached per xi).
  std::vector<double> lambda2_column(const std::vector<double>& xs,
                                     double xi) const;
  std::vector<double> lambda1_column(const std::vector<double>& xs,
                                     double xi) const;
  std::vector<double> lambda_tilde_column(const std::vector<double>& xs,
                                          double xi) const;

  /// Grid tables of e^{+Lambda_tilde}, e^{-Lambda_tilde}.
  Symbol exp_tilde_symbol(const GridSpec& g, int sign) const;

  /// Table of d_xi d_x lambda_2 on the grid (leading Neumann correction).
  Eigen::MatrixXcd dxi_dx_lambda2_table(const GridSpec& g) const;

 private:
  WeightParams p_;
  CutoffPair cut_;
  double torus_L_ = 0.0;
  double fd_step(double xi) const;
  double integrand(double y, double s, double expo) const;
  double integral(double x, double xi, double expo) const;
  double lambda2_raw(double x, double xi) const;
  double lambda1_raw(double x, double xi) const;
  double dx_lambda2_raw(double x, double xi) const;
  double dx_lambda1_raw(double x, double xi) const;
  double dxx_lambda2_raw(double x, double xi) const;
  double dxx_lambda1_raw(double x, double xi) const;
};

/// Lambda_{rho',k}(t, xi) = rho' <xi>_h^{1/theta} + k (T - t) <xi>_h^{2(1-sigma)}.
double capital_lambda(double t, double xi, const WeightParams& p);

/// d_xi^alpha e^{Lambda_{rho',k}(t,.)} / e^{Lambda_{rho',k}(t,.)} by a
/// centered stencil on exponent differences (overflow-free).
double capital_lambda_exp_ratio(double t, double xi, int alpha,
                                const WeightParams& p);

struct WeightScanReport {
  double fitted_C = 0.0;
  double worst_ratio = 0.0;
  double worst_x = 0.0;
  double worst_xi = 0.0;
  int worst_alpha = 0;
  int worst_beta = 0;
  bool finite = true;
};

struct LambdaEstimatesResult {
  WeightScanReport part_i;     // beta = 0 bounds
  WeightScanReport part_ii;    // beta >= 1 bounds
  WeightScanReport order_zero; // |d^a_xi d^b_x| <= C^{a+b+1}(a!b!)^mu <xi>_h^{-a}
};

enum class WhichLambda { Lambda1, Lambda2 };

/// Scans the derivative estimates of the two lemmas governing lambda_2 /
/// lambda_1 plus the order-zero property for beta >= 1.
LambdaEstimatesResult verify_lambda_estimates(WhichLambda which,
                                              const WeightParams& params,
                                              int sign_a3, int alpha_max,
                                              int beta_max);

struct NeumannInverse {
  Eigen::MatrixXcd inverse;  // {op(e^{Lambda_tilde})}^{-1} on the subspace
  Eigen::MatrixXcd r;        // extracted remainder: op(e^L) rev(e^-L) = Pi + r
  double r_norm = 0.0;
  int terms_used = 0;
  double residual = 0.0;     // ||op(e^L) inverse - Pi||
};

/// Inverse of e^{Lambda_tilde}(x,D) as rev(e^{-Lambda_tilde}) composed with
/// the truncated Neumann series.  Throws DivergenceError when the measured
/// ||r|| >= 1 (h below threshold).  The family must be torus-adapted to the
/// grid (see WeightFamily).
NeumannInverse invert_e_lambda(const GridSpec& g, const WeightFamily& fam,
                               int max_terms = 64);
NeumannInverse invert_e_lambda(const GridSpec& g, const WeightParams& params,
                               int sign_a3, int max_terms = 64);

struct HSweepEntry {
  double h = 0.0;
  double r_norm = 0.0;
  bool invertible = false;
};

/// Doubling sweep over h; stops at the first h with ||r|| < 1/2 (empirical
/// h0) or at h_max.
std::vector<HSweepEntry> sweep_inversion_h(const GridSpec& g,
                                           WeightParams params, int sign_a3,
                                           double h_first, double h_max);

/// The change of variables Q = e^{Lambda_{rho',k}}(t,D) o e^{Lambda_tilde}(x,D)
/// frozen at one time t.
struct QOperator {
  GridSpec grid;
  WeightParams params;
  int sign_a3 = 1;
  double t = 0.0;
  Symbol exp_tilde;                  // e^{Lambda_tilde}
  Eigen::MatrixXcd op_tilde;         // op(e^{Lambda_tilde})
  NeumannInverse tilde_inverse;

  GridFunction apply(const GridFunction& u) const;
  GridFunction inverse_apply(const GridFunction& w) const;
  Eigen::MatrixXcd matrix() const;
  Eigen::MatrixXcd inverse_matrix() const;
};

QOperator build_Q(const GridSpec& g, const WeightParams& params, int sign_a3,
                  double t, int max_terms = 64);

}  // namespace kdvlab
