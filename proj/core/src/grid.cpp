#include "kdvlab/grid.hpp"

#include <cmath>

#include "kdvlab/errors.hpp"
#include "kdvlab/fft.hpp"

namespace kdvlab {

double bracket(double xi, double h) { return std::hypot(h, xi); }

GridSpec::GridSpec(double L, int N, double h)
    : half_length(L), n_modes(N), bracket_h(h) {
  if (!(L > 0.0)) throw Error("GridSpec: half_length must be positive");
  if (N < 8 || N % 2 != 0) throw Error("GridSpec: n_modes must be even and >= 8");
  if (!(h >= 1.0)) throw Error("GridSpec: bracket_h must be >= 1");
}

double GridSpec::dxi() const { return M_PI / half_length; }

double GridSpec::freq(int i) const { return dxi() * mode_number(i); }

double GridSpec::max_freq() const { return dxi() * (n_modes / 2 - 1); }

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (!(a == b)) throw GridMismatchError(std::string(where) + ": grid mismatch");
}

GridFunction::GridFunction(const GridSpec& g, std::vector<cplx> v)
    : grid(g), values(std::move(v)) {
  if (static_cast<int>(values.size()) != g.size())
    throw Error("GridFunction: sample count does not match grid");
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  require_same_grid(grid, o.grid, "GridFunction::operator+=");
  for (size_t j = 0; j < values.size(); ++j) values[j] += o.values[j];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  require_same_grid(grid, o.grid, "GridFunction::operator-=");
  for (size_t j = 0; j < values.size(); ++j) values[j] -= o.values[j];
  return *this;
}

GridFunction& GridFunction::operator*=(cplx a) {
  for (auto& v : values) v *= a;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(cplx a, GridFunction u) { return u *= a; }

GridFunction sample(const GridSpec& g, const std::function<cplx(double)>& f) {
  GridFunction u(g);
  for (int j = 0; j < g.size(); ++j) u[j] = f(g.point(j));
  return u;
}

// The grid starts at x_0 = -L, so e^{-i xi_k x_j} = (-1)^k e^{-2 pi i jk/N};
// the (-1)^k twist converts between the DFT frame and the centered frame.
std::vector<cplx> spectrum(const GridFunction& u) {
  const int n = u.size();
  std::vector<cplx> out;
  fft::forward(u.values, out);
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const int k = u.grid.mode_number(i);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    out[i] *= sign * inv_n;
  }
  return out;
}

GridFunction synthesize(const GridSpec& g, const std::vector<cplx>& coeff) {
  const int n = g.size();
  if (static_cast<int>(coeff.size()) != n)
    throw Error("synthesize: coefficient count does not match grid");
  std::vector<cplx> twisted(coeff);
  for (int i = 0; i < n; ++i) {
    const int k = g.mode_number(i);
    if (k % 2 != 0) twisted[i] = -twisted[i];
  }
  GridFunction u(g);
  fft::backward(twisted, u.values);
  return u;
}

GridFunction unit_mode(const GridSpec& g, int storage_index) {
  std::vector<cplx> coeff(g.size(), cplx(0.0));
  coeff.at(storage_index) = cplx(1.0);
  return synthesize(g, coeff);
}

double linf_norm(const GridFunction& u) {
  double m = 0.0;
  for (const auto& v : u.values) m = std::max(m, std::abs(v));
  return m;
}

double linf_diff(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a.grid, b.grid, "linf_diff");
  double m = 0.0;
  for (size_t j = 0; j < a.values.size(); ++j)
    m = std::max(m, std::abs(a.values[j] - b.values[j]));
  return m;
}

}  // namespace kdvlab
