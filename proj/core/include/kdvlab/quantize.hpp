#pragma once

#include <Eigen/Dense>
#include <utility>

#include "kdvlab/symbol.hpp"

namespace kdvlab {

/// Kohn-Nirenberg quantization on the grid:
/// (op(p)u)(x_j) = sum_k e^{i xi_k x_j} p(x_j, xi_k) u_hat(xi_k),
/// Nyquist mode dropped.  x-independent p coincides with fourier_multiplier.
GridFunction quantize_apply(const Symbol& p, const GridFunction& u);

/// Dense realization of op(p) acting on physical sample vectors.
/// Guarded by N <= 1024.
Eigen::MatrixXcd quantize_matrix(const Symbol& p);

/// Right (y-side) quantization: the output spectral coefficient at xi_k is
/// (1/N) sum_j e^{-i xi_k y_j} p(y_j, xi_k) u(y_j).  Discrete analogue of the
/// reverse operator  Os-iint e^{i xi (x-y)} p(y,xi) u(y) dy dslash(xi).
GridFunction reverse_quantize_apply(const Symbol& p, const GridFunction& u);

Eigen::MatrixXcd reverse_quantize_matrix(const Symbol& p);

/// Truncated composition sum_{a < n_terms} (1/a!) d_xi^a p . D_x^a q
/// (D = -i d/dx).  Exact (up to finite differences) when p is polynomial in
/// xi of degree < n_terms.
Symbol compose_asymptotic(const Symbol& p, const Symbol& q, int n_terms);

/// (H, A) with H = (M + M*)/2, A = (M - M*)/2 of M = quantize_matrix(p).
std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> hermitian_split(const Symbol& p);

/// Smallest eigenvalue of the Hermitian part of op(p); the discrete stand-in
/// for sharp-Garding / Fefferman-Phong lower bounds.
double garding_floor(const Symbol& p);

/// Largest singular value.
double operator_norm(const Eigen::MatrixXcd& m);

/// Projector onto the zero-Nyquist subspace (identity with one zero on the
/// diagonal line of the Nyquist mode); every quantized operator annihilates
/// that line, so operator identities are stated against this projector.
Eigen::MatrixXcd nyquist_projector(const GridSpec& g);

GridFunction apply_matrix(const Eigen::MatrixXcd& m, const GridFunction& u);

}  // namespace kdvlab
