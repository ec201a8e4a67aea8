#include "kdvlab/symbol.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "kdvlab/errors.hpp"
#include "kdvlab/fft.hpp"

namespace kdvlab {

Symbol::Symbol(const GridSpec& g, Eigen::MatrixXcd t, double m1, double m2,
               double mu)
    : grid(g), table(std::move(t)), xi_order(m1), x_order(m2), gevrey_mu(mu) {
  if (table.rows() != g.size() || table.cols() != g.size())
    throw Error("Symbol: table must be N x N");
  if (!table.allFinite()) throw OverflowError("Symbol: table not finite");
}

Symbol make_symbol(const GridSpec& g,
                   const std::function<cplx(double, double)>& p, double m1,
                   double m2, double mu) {
  const int n = g.size();
  Eigen::MatrixXcd t(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) t(j, i) = p(g.point(j), g.freq(i));
  return Symbol(g, std::move(t), m1, m2, mu);
}

Symbol multiplier_symbol(const GridSpec& g, const std::function<cplx(double)>& m,
                         double order, double mu) {
  return make_symbol(
      g, [&m](double, double xi) { return m(xi); }, order, 0.0, mu);
}

Symbol operator+(const Symbol& a, const Symbol& b) {
  require_same_grid(a.grid, b.grid, "Symbol::operator+");
  return Symbol(a.grid, a.table + b.table, std::max(a.xi_order, b.xi_order),
                std::max(a.x_order, b.x_order), std::max(a.gevrey_mu, b.gevrey_mu));
}

Symbol operator-(const Symbol& a, const Symbol& b) {
  require_same_grid(a.grid, b.grid, "Symbol::operator-");
  return Symbol(a.grid, a.table - b.table, std::max(a.xi_order, b.xi_order),
                std::max(a.x_order, b.x_order), std::max(a.gevrey_mu, b.gevrey_mu));
}

Symbol operator*(cplx c, const Symbol& a) {
  return Symbol(a.grid, c * a.table, a.xi_order, a.x_order, a.gevrey_mu);
}

Symbol pointwise(const Symbol& a, const Symbol& b) {
  require_same_grid(a.grid, b.grid, "Symbol::pointwise");
  return Symbol(a.grid, a.table.cwiseProduct(b.table), a.xi_order + b.xi_order,
                a.x_order + b.x_order, std::max(a.gevrey_mu, b.gevrey_mu));
}

namespace {

// One d/dxi pass over a row laid out in natural ladder order.
void ladder_derivative(std::vector<cplx>& f, double h) {
  const int n = static_cast<int>(f.size());
  std::vector<cplx> d(n);
  const double w = 1.0 / (12.0 * h);
  for (int i = 0; i < n; ++i) {
    if (i >= 2 && i <= n - 3) {
      d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * w;
    } else if (i == 0) {
      d[i] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] -
              3.0 * f[4]) * w;
    } else if (i == 1) {
      d[i] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * w;
    } else if (i == n - 2) {
      d[i] = -(-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] -
               6.0 * f[n - 4] + f[n - 5]) * w;
    } else {  // i == n - 1
      d[i] = -(-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] +
               16.0 * f[n - 4] - 3.0 * f[n - 5]) * w;
    }
  }
  f = std::move(d);
}

}  // namespace

Eigen::MatrixXcd table_dxi(const GridSpec& g, const Eigen::MatrixXcd& t,
                           int order) {
  if (order > kDerivativeDepthCap)
    throw SizeGuardError("table_dxi: derivative depth cap exceeded");
  const int n = g.size();
  // natural ladder order: k = -N/2 .. N/2-1 <-> storage (k + N) % N
  std::vector<int> nat(n);
  for (int k = -n / 2; k < n / 2; ++k) nat[k + n / 2] = (k + n) % n;
  Eigen::MatrixXcd out = t;
  for (int j = 0; j < n; ++j) {
    std::vector<cplx> row(n);
    for (int i = 0; i < n; ++i) row[i] = out(j, nat[i]);
    for (int o = 0; o < order; ++o) ladder_derivative(row, g.dxi());
    for (int i = 0; i < n; ++i) out(j, nat[i]) = row[i];
  }
  return out;
}

Eigen::MatrixXcd table_dx(const GridSpec& g, const Eigen::MatrixXcd& t,
                          int order) {
  if (order > kDerivativeDepthCap)
    throw SizeGuardError("table_dx: derivative depth cap exceeded");
  const int n = g.size();
  Eigen::MatrixXcd out(n, n);
  std::vector<cplx> col(n), spec, back;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) col[j] = t(j, i);
    fft::forward(col, spec);
    for (int s = 0; s < n; ++s) {
      const double xi = g.freq(s);
      spec[s] *= std::pow(cplx(0.0, xi), order) / static_cast<double>(n);
      if (s == g.nyquist_index()) spec[s] = cplx(0.0);
    }
    fft::backward(spec, back);
    for (int j = 0; j < n; ++j) out(j, i) = back[j];
  }
  return out;
}

Symbol symbol_dxi(const Symbol& p, int order) {
  return Symbol(p.grid, table_dxi(p.grid, p.table, order), p.xi_order - order,
                p.x_order, p.gevrey_mu);
}

Symbol symbol_dx(const Symbol& p, int order) {
  return Symbol(p.grid, table_dx(p.grid, p.table, order), p.xi_order,
                p.x_order - order, p.gevrey_mu);
}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

SeminormReport estimate_seminorm(const Symbol& p, const SymbolClassSpec& cls,
                                 int alpha_max, int beta_max) {
  if (alpha_max > kDerivativeDepthCap || beta_max > kDerivativeDepthCap)
    throw SizeGuardError("estimate_seminorm: derivative depth cap exceeded");
  const GridSpec& g = p.grid;
  const int n = g.size();
  SeminormReport rep;
  rep.alpha_max = alpha_max;
  rep.beta_max = beta_max;

  // d_x^beta applied first (spectral), then d_xi^alpha ladder passes.
  Eigen::MatrixXcd dxb = p.table;
  for (int beta = 0; beta <= beta_max; ++beta) {
    if (beta > 0) dxb = table_dx(g, dxb, 1);
    Eigen::MatrixXcd dab = dxb;
    for (int alpha = 0; alpha <= alpha_max; ++alpha) {
      if (alpha > 0) dab = table_dxi(g, dab, 1);
      const double fac = std::pow(factorial(alpha) * factorial(beta), cls.mu);
      double sup = 0.0;
      double sup_x = 0.0, sup_xi = 0.0;
      for (int j = 0; j < n; ++j) {
        const double x = g.point(j);
        for (int i = 0; i < n; ++i) {
          const double xi = g.freq(i);
          double denom = fac * std::pow(bracket(xi, g.bracket_h), cls.m1 - alpha);
          if (cls.kind == SymbolClassSpec::Kind::SG)
            denom *= std::pow(bracket(x, 1.0), cls.m2 - beta);
          const double r = std::abs(dab(j, i)) / denom;
          if (!std::isfinite(r)) rep.finite = false;
          if (r > sup) {
            sup = r;
            sup_x = x;
            sup_xi = xi;
          }
        }
      }
      if (sup > rep.worst_ratio) {
        rep.worst_ratio = sup;
        rep.worst_x = sup_x;
        rep.worst_xi = sup_xi;
        rep.worst_alpha = alpha;
        rep.worst_beta = beta;
      }
      const double a_fit = std::pow(sup, 1.0 / (alpha + beta + 1));
      rep.fitted_A = std::max(rep.fitted_A, a_fit);
    }
  }
  return rep;
}

void write_symbol_csv(const Symbol& p, std::ostream& os) {
  const GridSpec& g = p.grid;
  os << "# L=" << g.half_length << ",N=" << g.n_modes << ",h=" << g.bracket_h
     << ",m1=" << p.xi_order << ",m2=" << p.x_order << ",mu=" << p.gevrey_mu
     << "\n";
  os << "x,xi,re,im\n";
  os.precision(17);
  for (int j = 0; j < g.size(); ++j)
    for (int i = 0; i < g.size(); ++i)
      os << g.point(j) << ',' << g.freq(i) << ',' << p.table(j, i).real() << ','
         << p.table(j, i).imag() << "\n";
}

void write_symbol_csv(const Symbol& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("write_symbol_csv: cannot open " + path);
  write_symbol_csv(p, os);
}

Symbol read_symbol_csv(std::istream& is) {
  std::string header;
  std::getline(is, header);
  double L = 0, h = 0, m1 = 0, m2 = 0, mu = 0;
  int N = 0;
  if (std::sscanf(header.c_str(), "# L=%lf,N=%d,h=%lf,m1=%lf,m2=%lf,mu=%lf", &L,
                  &N, &h, &m1, &m2, &mu) != 6)
    throw Error("read_symbol_csv: malformed header");
  std::string cols;
  std::getline(is, cols);
  GridSpec g(L, N, h);
  Eigen::MatrixXcd t(N, N);
  std::string line;
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      if (!std::getline(is, line)) throw Error("read_symbol_csv: truncated table");
      double x, xi, re, im;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &x, &xi, &re, &im) != 4)
        throw Error("read_symbol_csv: malformed row");
      t(j, i) = cplx(re, im);
    }
  return Symbol(g, std::move(t), m1, m2, mu);
}

}  // namespace kdvlab
