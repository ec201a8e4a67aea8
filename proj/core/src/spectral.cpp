#include "kdvlab/spectral.hpp"

#include <cmath>

#include "kdvlab/errors.hpp"

namespace kdvlab {

GevreyIndex::GevreyIndex(double m_, double rho_, double theta_)
    : m(m_), rho(rho_), theta(theta_) {
  if (!(theta > 1.0)) throw Error("GevreyIndex: theta must be > 1");
  if (!(rho >= 0.0)) throw Error("GevreyIndex: rho must be >= 0");
}

GridFunction fourier_multiplier(const std::function<cplx(double)>& m,
                                const GridFunction& u) {
  auto coeff = spectrum(u);
  const int n = u.size();
  for (int i = 0; i < n; ++i) {
    if (i == u.grid.nyquist_index()) {
      coeff[i] = cplx(0.0);
      continue;
    }
    const cplx mv = m(u.grid.freq(i));
    if (!std::isfinite(mv.real()) || !std::isfinite(mv.imag()))
      throw OverflowError(
          "fourier_multiplier: symbol not representable at grid frequency");
    coeff[i] *= mv;
  }
  return synthesize(u.grid, coeff);
}

GridFunction spectral_derivative(const GridFunction& u, int order) {
  return fourier_multiplier(
      [order](double xi) { return std::pow(cplx(0.0, xi), order); }, u);
}

GridFunction d_operator(const GridFunction& u, int order) {
  return fourier_multiplier(
      [order](double xi) { return cplx(std::pow(xi, order), 0.0); }, u);
}

double l2_norm(const GridFunction& u) {
  const double w = u.grid.dx();
  double s = 0.0;
  for (const auto& v : u.values) s += std::norm(v);
  return std::sqrt(w * s);
}

namespace {

double gevrey_weight(double xi, const GevreyIndex& idx) {
  const double br = bracket(xi, 1.0);
  const double w = std::pow(br, idx.m) *
                   std::exp(idx.rho * std::pow(br, 1.0 / idx.theta));
  return w;
}

}  // namespace

// Plancherel on the grid: ||u||_{L^2}^2 = 2L sum_k |c_k|^2, so the weighted
// norm is a plain weighted coefficient sum.
double gevrey_norm(const GridFunction& u, const GevreyIndex& idx) {
  auto coeff = spectrum(u);
  const int n = u.size();
  const double two_l = 2.0 * u.grid.half_length;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == u.grid.nyquist_index()) continue;
    const double w = gevrey_weight(u.grid.freq(i), idx);
    if (!std::isfinite(w))
      throw OverflowError("gevrey_norm: weight overflow at grid frequency");
    s += w * w * std::norm(coeff[i]);
  }
  return std::sqrt(two_l * s);
}

cplx gevrey_inner(const GridFunction& u, const GridFunction& v,
                  const GevreyIndex& idx) {
  require_same_grid(u.grid, v.grid, "gevrey_inner");
  auto cu = spectrum(u);
  auto cv = spectrum(v);
  const int n = u.size();
  const double two_l = 2.0 * u.grid.half_length;
  cplx s(0.0);
  for (int i = 0; i < n; ++i) {
    if (i == u.grid.nyquist_index()) continue;
    const double w = gevrey_weight(u.grid.freq(i), idx);
    if (!std::isfinite(w))
      throw OverflowError("gevrey_inner: weight overflow at grid frequency");
    s += w * w * cu[i] * std::conj(cv[i]);
  }
  return two_l * s;
}

double sobolev_norm(const GridFunction& u, double m) {
  return gevrey_norm(u, GevreyIndex(m, 0.0, 2.0));
}

int tame_band_index(double bracket_xi, double theta) {
  if (bracket_xi < 1.0) return 1;
  int j = static_cast<int>(std::floor(std::pow(bracket_xi, 1.0 / theta)));
  if (j < 1) j = 1;
  // Guard floor() roundoff at band edges.
  while (std::pow(j + 1, theta) <= bracket_xi) ++j;
  while (j > 1 && std::pow(j, theta) > bracket_xi) --j;
  return j;
}

std::vector<GridFunction> tame_decompose(const GridFunction& u, double theta) {
  if (!(theta > 1.0)) throw Error("tame_decompose: theta must be > 1");
  auto coeff = spectrum(u);
  const int n = u.size();
  int max_band = 1;
  std::vector<int> band(n, 0);
  for (int i = 0; i < n; ++i) {
    if (i == u.grid.nyquist_index()) continue;
    band[i] = tame_band_index(bracket(u.grid.freq(i), 1.0), theta);
    max_band = std::max(max_band, band[i]);
  }
  std::vector<GridFunction> pieces;
  pieces.reserve(max_band);
  for (int j = 1; j <= max_band; ++j) {
    std::vector<cplx> c(n, cplx(0.0));
    for (int i = 0; i < n; ++i)
      if (i != u.grid.nyquist_index() && band[i] == j) c[i] = coeff[i];
    pieces.push_back(synthesize(u.grid, c));
  }
  return pieces;
}

GridFunction tame_reassemble(const std::vector<GridFunction>& pieces,
                             double theta, const GridSpec& grid) {
  if (!(theta > 1.0)) throw Error("tame_reassemble: theta must be > 1");
  const int n = grid.size();
  std::vector<cplx> acc(n, cplx(0.0));
  for (size_t p = 0; p < pieces.size(); ++p) {
    require_same_grid(grid, pieces[p].grid, "tame_reassemble");
    auto coeff = spectrum(pieces[p]);
    const int j = static_cast<int>(p) + 1;
    for (int i = 0; i < n; ++i) {
      if (i == grid.nyquist_index()) continue;
      if (tame_band_index(bracket(grid.freq(i), 1.0), theta) == j)
        acc[i] += coeff[i];
    }
  }
  return synthesize(grid, acc);
}

double sigma_seminorm(const std::vector<GridFunction>& pieces, int k) {
  double s = 0.0;
  for (size_t p = 0; p < pieces.size(); ++p) {
    const double nrm = l2_norm(pieces[p]);
    s += std::exp(2.0 * k * static_cast<double>(p + 1)) * nrm * nrm;
  }
  return std::sqrt(s);
}

double grading_seminorm(const GridFunction& u, int k, double theta) {
  return gevrey_norm(u, GevreyIndex(0.0, static_cast<double>(k), theta));
}

}  // namespace kdvlab
