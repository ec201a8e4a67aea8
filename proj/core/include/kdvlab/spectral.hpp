#pragma once

#include <functional>
#include <vector>

#include "kdvlab/grid.hpp"

namespace kdvlab {

/// Index (m, rho, theta) of the Gevrey-Sobolev norm
/// ||<D>^m e^{rho <D>^{1/theta}} u||_{L^2}, plain bracket <xi> = <xi>_1.
struct GevreyIndex {
  double m = 0.0;
  double rho = 0.0;
  double theta = 2.0;

  GevreyIndex() = default;
  GevreyIndex(double m_, double rho_, double theta_);
};

/// Applies the Fourier multiplier u -> m(xi) u mode-by-mode.  The Nyquist
/// mode is zeroed.  Throws OverflowError if m is not finite at some grid
/// frequency (rho/theta/grid mismatch).
GridFunction fourier_multiplier(const std::function<cplx(double)>& m,
                                const GridFunction& u);

/// Spectral derivative (i xi)^order.
GridFunction spectral_derivative(const GridFunction& u, int order);

/// D^order with D = -i d/dx, i.e. multiplier xi^order.
GridFunction d_operator(const GridFunction& u, int order);

/// Discrete L^2 norm with trapezoid weight 2L/N.
double l2_norm(const GridFunction& u);

double gevrey_norm(const GridFunction& u, const GevreyIndex& idx);
cplx gevrey_inner(const GridFunction& u, const GridFunction& v,
                  const GevreyIndex& idx);

/// Plain Sobolev H^m norm (rho = 0).
double sobolev_norm(const GridFunction& u, double m);

/// Spectral band decomposition of Theorem-2.3 type: piece j (1-based; slot
/// j-1 of the result) carries the modes with j^theta <= <xi> < (j+1)^theta.
/// Any content with <xi> < 1 (impossible for the exact bracket, kept for
/// safety) joins band 1.
std::vector<GridFunction> tame_decompose(const GridFunction& u, double theta);

/// Left inverse of tame_decompose: re-restrict each piece to its band and sum.
GridFunction tame_reassemble(const std::vector<GridFunction>& pieces,
                             double theta, const GridSpec& grid);

/// Band index (1-based) for a bracket value <xi>.
int tame_band_index(double bracket_xi, double theta);

/// Sigma(B)-grading seminorm of a banded sequence:
/// ( sum_j e^{2jk} ||piece_j||_{L^2}^2 )^{1/2}, j 1-based.
double sigma_seminorm(const std::vector<GridFunction>& pieces, int k);

/// Grading seminorm |u|_k = ||u||_{H^0_{k;theta}}.
double grading_seminorm(const GridFunction& u, int k, double theta);

}  // namespace kdvlab
