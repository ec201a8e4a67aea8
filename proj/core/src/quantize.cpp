#include "kdvlab/quantize.hpp"

#include <cmath>

#include "kdvlab/errors.hpp"
#include "kdvlab/spectral.hpp"

namespace kdvlab {

namespace {

constexpr int kDenseCeiling = 1024;

void check_dense(const GridSpec& g, const char* where) {
  if (g.size() > kDenseCeiling)
    throw SizeGuardError(std::string(where) + ": N exceeds dense ceiling 1024");
}

// Phase table E(j, i) = e^{i xi_i x_j}.
Eigen::MatrixXcd phase_table(const GridSpec& g) {
  const int n = g.size();
  Eigen::MatrixXcd e(n, n);
  for (int j = 0; j < n; ++j) {
    const double x = g.point(j);
    for (int i = 0; i < n; ++i) e(j, i) = std::polar(1.0, g.freq(i) * x);
  }
  return e;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

namespace {

// Zero the Nyquist spectral coefficient; equals I - v v^*/N in physical space.
GridFunction project_nyquist(const GridFunction& u) {
  auto coeff = spectrum(u);
  coeff[u.grid.nyquist_index()] = cplx(0.0);
  return synthesize(u.grid, coeff);
}

}  // namespace

GridFunction quantize_apply(const Symbol& p, const GridFunction& u) {
  require_same_grid(p.grid, u.grid, "quantize_apply");
  const int n = u.size();
  auto coeff = spectrum(u);
  coeff[u.grid.nyquist_index()] = cplx(0.0);
  GridFunction out(u.grid);
  for (int j = 0; j < n; ++j) {
    const double x = u.grid.point(j);
    cplx acc(0.0);
    for (int i = 0; i < n; ++i) {
      if (i == u.grid.nyquist_index()) continue;
      acc += p.table(j, i) * coeff[i] * std::polar(1.0, u.grid.freq(i) * x);
    }
    out[j] = acc;
  }
  // x-dependent symbols can leak content back onto the Nyquist line; keep
  // every quantized operator invariant on the zero-Nyquist subspace.
  return project_nyquist(out);
}

Eigen::MatrixXcd quantize_matrix(const Symbol& p) {
  check_dense(p.grid, "quantize_matrix");
  const int n = p.grid.size();
  Eigen::MatrixXcd e = phase_table(p.grid);
  Eigen::MatrixXcd pe = p.table.cwiseProduct(e);
  pe.col(p.grid.nyquist_index()).setZero();
  Eigen::MatrixXcd m = (pe * e.adjoint()) / static_cast<double>(n);
  return nyquist_projector(p.grid) * m;
}

GridFunction reverse_quantize_apply(const Symbol& p, const GridFunction& u) {
  require_same_grid(p.grid, u.grid, "reverse_quantize_apply");
  const int n = u.size();
  const GridFunction uin = project_nyquist(u);
  std::vector<cplx> coeff(n, cplx(0.0));
  for (int i = 0; i < n; ++i) {
    if (i == u.grid.nyquist_index()) continue;
    const double xi = u.grid.freq(i);
    cplx acc(0.0);
    for (int j = 0; j < n; ++j)
      acc += std::polar(1.0, -xi * u.grid.point(j)) * p.table(j, i) * uin[j];
    coeff[i] = acc / static_cast<double>(n);
  }
  return synthesize(u.grid, coeff);
}

Eigen::MatrixXcd reverse_quantize_matrix(const Symbol& p) {
  check_dense(p.grid, "reverse_quantize_matrix");
  const int n = p.grid.size();
  Eigen::MatrixXcd e = phase_table(p.grid);
  Eigen::MatrixXcd pe = e.conjugate().cwiseProduct(p.table);
  pe.col(p.grid.nyquist_index()).setZero();
  Eigen::MatrixXcd m = (e * pe.transpose()) / static_cast<double>(n);
  return m * nyquist_projector(p.grid);
}

Symbol compose_asymptotic(const Symbol& p, const Symbol& q, int n_terms) {
  require_same_grid(p.grid, q.grid, "compose_asymptotic");
  if (n_terms < 1) throw Error("compose_asymptotic: n_terms must be >= 1");
  if (n_terms - 1 > kDerivativeDepthCap)
    throw SizeGuardError("compose_asymptotic: derivative depth cap exceeded");
  Eigen::MatrixXcd acc = p.table.cwiseProduct(q.table);
  Eigen::MatrixXcd dp = p.table;
  Eigen::MatrixXcd dq = q.table;
  const cplx mi(0.0, -1.0);  // D_x = -i d/dx
  for (int a = 1; a < n_terms; ++a) {
    dp = table_dxi(p.grid, dp, 1);
    dq = table_dx(q.grid, dq, 1);
    acc += (std::pow(mi, a) / factorial(a)) * dp.cwiseProduct(dq);
  }
  return Symbol(p.grid, std::move(acc), p.xi_order + q.xi_order,
                p.x_order + q.x_order, std::max(p.gevrey_mu, q.gevrey_mu));
}

std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> hermitian_split(const Symbol& p) {
  Eigen::MatrixXcd m = quantize_matrix(p);
  Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::MatrixXcd a = 0.5 * (m - m.adjoint());
  return {std::move(h), std::move(a)};
}

double garding_floor(const Symbol& p) {
  auto [h, a] = hermitian_split(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h,
                                                         Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw Error("garding_floor: eigenvalue solver failed");
  return solver.eigenvalues().minCoeff();
}

double operator_norm(const Eigen::MatrixXcd& m) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

Eigen::MatrixXcd nyquist_projector(const GridSpec& g) {
  // The projector in physical coordinates: I - v v^* / N with v the Nyquist
  // column of the phase table.
  const int n = g.size();
  Eigen::VectorXcd v(n);
  const double xi = g.freq(g.nyquist_index());
  for (int j = 0; j < n; ++j) v(j) = std::polar(1.0, xi * g.point(j));
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Identity(n, n);
  p -= (v * v.adjoint()) / static_cast<double>(n);
  return p;
}

GridFunction apply_matrix(const Eigen::MatrixXcd& m, const GridFunction& u) {
  const int n = u.size();
  if (m.rows() != n || m.cols() != n)
    throw GridMismatchError("apply_matrix: dimension mismatch");
  Eigen::Map<const Eigen::VectorXcd> vu(u.values.data(), n);
  Eigen::VectorXcd r = m * vu;
  GridFunction out(u.grid);
  for (int j = 0; j < n; ++j) out[j] = r(j);
  return out;
}

}  // namespace kdvlab
