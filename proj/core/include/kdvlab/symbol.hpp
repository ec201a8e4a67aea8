#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <string>

#include "kdvlab/grid.hpp"

namespace kdvlab {

/// Discretized symbol p(x, xi): table indexed (row = grid point x_j,
/// col = FFT storage index of xi_k).  Declared orders are metadata; whether
/// they hold is measured by estimate_seminorm.
struct Symbol {
  GridSpec grid;
  Eigen::MatrixXcd table;  // N x N
  double xi_order = 0.0;   // m1
  double x_order = 0.0;    // m2
  double gevrey_mu = 2.0;  // declared regularity index

  Symbol() = default;
  Symbol(const GridSpec& g, Eigen::MatrixXcd t, double m1, double m2, double mu);

  cplx at(int j, int i) const { return table(j, i); }
};

Symbol make_symbol(const GridSpec& g,
                   const std::function<cplx(double, double)>& p, double m1,
                   double m2, double mu);
Symbol multiplier_symbol(const GridSpec& g, const std::function<cplx(double)>& m,
                         double order, double mu = 2.0);

Symbol operator+(const Symbol& a, const Symbol& b);
Symbol operator-(const Symbol& a, const Symbol& b);
Symbol operator*(cplx c, const Symbol& a);
/// Pointwise product of tables (orders add).
Symbol pointwise(const Symbol& a, const Symbol& b);

/// d/dxi along the frequency ladder, 4th-order centered finite differences
/// with one-sided closure at the ladder ends.  Higher orders by iteration.
Eigen::MatrixXcd table_dxi(const GridSpec& g, const Eigen::MatrixXcd& t,
                           int order = 1);
/// d/dx by spectral differentiation down each frequency column (table must
/// be periodic in x for this to be meaningful).
Eigen::MatrixXcd table_dx(const GridSpec& g, const Eigen::MatrixXcd& t,
                          int order = 1);

Symbol symbol_dxi(const Symbol& p, int order = 1);
Symbol symbol_dx(const Symbol& p, int order = 1);

struct SymbolClassSpec {
  enum class Kind { S, SG };
  Kind kind = Kind::S;
  double m1 = 0.0;
  double m2 = 0.0;
  double mu = 2.0;
};

struct SeminormReport {
  int alpha_max = 0;
  int beta_max = 0;
  double worst_ratio = 0.0;
  double worst_x = 0.0;
  double worst_xi = 0.0;
  int worst_alpha = 0;
  int worst_beta = 0;
  double fitted_A = 0.0;
  bool finite = true;
};

/// Scans |d_xi^a d_x^b p| / ((a! b!)^mu <xi>_h^{m1-a} <x>^{m2-b}) over the
/// grid (the <x> factor only for kind SG) and fits the smallest A with
/// sup-ratio <= A^{a+b+1} across all scanned derivative pairs.
SeminormReport estimate_seminorm(const Symbol& p, const SymbolClassSpec& cls,
                                 int alpha_max, int beta_max);

/// Flat CSV serialization, x-major, with a header carrying L, N, h, m1, m2, mu.
void write_symbol_csv(const Symbol& p, std::ostream& os);
void write_symbol_csv(const Symbol& p, const std::string& path);
Symbol read_symbol_csv(std::istream& is);

inline constexpr int kDerivativeDepthCap = 8;

}  // namespace kdvlab
