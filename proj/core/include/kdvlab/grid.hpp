#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace kdvlab {

using cplx = std::complex<double>;

/// Japanese bracket with large parameter: <xi>_h = (h^2 + xi^2)^(1/2).
double bracket(double xi, double h);

/// Periodic truncation of the line: domain [-L, L), N equispaced points
/// x_j = -L + 2Lj/N, discrete frequencies xi_k = pi k / L for
/// k = -N/2 .. N/2-1.  The Nyquist row k = -N/2 has no well-defined sign
/// of xi and is annihilated by every multiplier/quantization operation.
struct GridSpec {
  double half_length = 0.0;  // L
  int n_modes = 0;           // N, even, >= 8
  double bracket_h = 1.0;    // h >= 1

  GridSpec() = default;
  GridSpec(double L, int N, double h = 1.0);

  int size() const { return n_modes; }
  double dx() const { return 2.0 * half_length / n_modes; }
  double dxi() const;  // frequency spacing pi/L
  double point(int j) const { return -half_length + 2.0 * half_length * j / n_modes; }

  // Frequency for FFT storage index i (0..N-1): k = i for i < N/2, else i - N.
  int mode_number(int i) const { return i < n_modes / 2 ? i : i - n_modes; }
  double freq(int i) const;
  int nyquist_index() const { return n_modes / 2; }
  double max_freq() const;  // pi (N/2 - 1) / L, largest resolved |xi|

  bool operator==(const GridSpec&) const = default;
};

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where);

/// Complex-valued function sampled on a GridSpec; plain value semantics.
struct GridFunction {
  GridSpec grid;
  std::vector<cplx> values;  // length N, physical samples

  GridFunction() = default;
  explicit GridFunction(const GridSpec& g) : grid(g), values(g.size(), cplx(0.0)) {}
  GridFunction(const GridSpec& g, std::vector<cplx> v);

  int size() const { return grid.size(); }
  cplx& operator[](int j) { return values[j]; }
  const cplx& operator[](int j) const { return values[j]; }

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(cplx a);
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(cplx a, GridFunction u);

/// Sample a callable x -> complex on the grid.
GridFunction sample(const GridSpec& g, const std::function<cplx(double)>& f);

/// Spectral coefficients c_k with u(x_j) = sum_k c_k e^{i xi_k x_j};
/// returned in FFT storage order (index i <-> mode_number(i)).
std::vector<cplx> spectrum(const GridFunction& u);

/// Inverse of spectrum(): synthesize physical samples from coefficients.
GridFunction synthesize(const GridSpec& g, const std::vector<cplx>& coeff);

/// Single resolved Fourier mode e^{i xi_k x} for storage index i.
GridFunction unit_mode(const GridSpec& g, int storage_index);

double linf_norm(const GridFunction& u);
double linf_diff(const GridFunction& a, const GridFunction& b);

}  // namespace kdvlab
