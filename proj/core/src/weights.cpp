#include "kdvlab/weights.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <limits>

#include "kdvlab/errors.hpp"
#include "kdvlab/spectral.hpp"

namespace kdvlab {

namespace {

// 4th-order centered stencils for point derivatives of a callable.
template <typename F>
double point_fd(const F& f, double x0, double delta, int order) {
  switch (order) {
    case 0:
      return f(x0);
    case 1:
      return (f(x0 - 2 * delta) - 8 * f(x0 - delta) + 8 * f(x0 + delta) -
              f(x0 + 2 * delta)) /
             (12 * delta);
    case 2:
      return (-f(x0 - 2 * delta) + 16 * f(x0 - delta) - 30 * f(x0) +
              16 * f(x0 + delta) - f(x0 + 2 * delta)) /
             (12 * delta * delta);
    case 3:
      return (f(x0 - 3 * delta) - 8 * f(x0 - 2 * delta) + 13 * f(x0 - delta) -
              13 * f(x0 + delta) + 8 * f(x0 + 2 * delta) - f(x0 + 3 * delta)) /
             (8 * delta * delta * delta);
    case 4:
      return (-f(x0 - 3 * delta) + 12 * f(x0 - 2 * delta) -
              39 * f(x0 - delta) + 56 * f(x0) - 39 * f(x0 + delta) +
              12 * f(x0 + 2 * delta) - f(x0 + 3 * delta)) /
             (6 * std::pow(delta, 4));
    default:
      throw SizeGuardError("point_fd: derivative order beyond stencil set");
  }
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

void WeightParams::validate() const {
  if (!(sigma > 0.5 && sigma < 1.0))
    throw Error("WeightParams: sigma must lie in (1/2, 1)");
  const double theta_cap = 1.0 / (2.0 * (1.0 - sigma));
  if (!(theta > 1.0 && theta < theta_cap))
    throw Error("WeightParams: theta must lie in (1, 1/(2(1-sigma)))");
  const double m = mu_or_default();
  if (!(m > 1.0 && m < theta))
    throw Error("WeightParams: mu must lie in (1, theta)");
  if (!(h >= 1.0)) throw Error("WeightParams: h must be >= 1");
  if (M2 < 0.0 || M1 < 0.0 || k < 0.0 || rho_prime < 0.0)
    throw Error("WeightParams: M2, M1, k, rho_prime must be >= 0");
  if (!(T > 0.0)) throw Error("WeightParams: T must be > 0");
  if (!(taper_inner > 0.0 && taper_inner < taper_outer && taper_outer < 1.0))
    throw Error("WeightParams: need 0 < taper_inner < taper_outer < 1");
}

// ---------------------------------------------------------------------------
// CutoffPair

CutoffPair::CutoffPair(double mu, int sign_a3) : mu_(mu), sign_a3_(sign_a3) {
  if (!(mu > 1.0)) throw Error("CutoffPair: mu must be > 1");
  if (sign_a3 != 1 && sign_a3 != -1)
    throw Error("CutoffPair: sign_a3 must be +1 or -1");
  // Cumulative integral of the bump on a fine lattice; between nodes the
  // transition is Hermite-interpolated with the exact bump as derivative.
  const int m = 2048;
  const int sub = 8;
  tab_.assign(m + 1, 0.0);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double a = -1.0 + 2.0 * i / m;
    const double hseg = 2.0 / m / sub;
    for (int s = 0; s < sub; ++s) {
      const double y0 = a + s * hseg;
      acc += hseg / 6.0 *
             (bump(y0) + 4.0 * bump(y0 + 0.5 * hseg) + bump(y0 + hseg));
    }
    tab_[i + 1] = acc;
  }
  norm_ = acc;
  for (auto& v : tab_) v /= norm_;
}

double CutoffPair::bump(double y) const {
  if (std::abs(y) >= 1.0) return 0.0;
  const double q = 1.0 / (mu_ - 1.0);
  return std::exp(-std::pow(1.0 - y * y, -q));
}

double CutoffPair::transition(double u) const {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const int m = static_cast<int>(tab_.size()) - 1;
  const double s = (u + 1.0) * 0.5 * m;
  int i = std::min(static_cast<int>(s), m - 1);
  const double t = s - i;
  const double hgrid = 2.0 / m;
  const double v0 = tab_[i], v1 = tab_[i + 1];
  const double d0 = bump(-1.0 + hgrid * i) / norm_ * hgrid;
  const double d1 = bump(-1.0 + hgrid * (i + 1)) / norm_ * hgrid;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * d0 +
         (-2 * t3 + 3 * t2) * v1 + (t3 - t2) * d1;
}

double CutoffPair::transition_d1(double u) const {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return bump(u) / norm_;
}

double CutoffPair::transition_d2(double u) const {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double q = 1.0 / (mu_ - 1.0);
  // d/du exp(-(1-u^2)^{-q}) = -2 q u (1-u^2)^{-q-1} bump(u)
  return -2.0 * q * u * std::pow(1.0 - u * u, -q - 1.0) * bump(u) / norm_;
}

double CutoffPair::w(double xi) const {
  return -sign_a3_ * transition(2.0 * (std::abs(xi) - 1.5));
}

double CutoffPair::dw(double xi) const {
  return -sign_a3_ * transition_d1(2.0 * (std::abs(xi) - 1.5)) * 2.0 * sgn(xi);
}

double CutoffPair::psi(double y) const {
  return 1.0 - transition(4.0 * (std::abs(y) - 0.75));
}

double CutoffPair::dpsi(double y) const {
  return -transition_d1(4.0 * (std::abs(y) - 0.75)) * 4.0 * sgn(y);
}

// ---------------------------------------------------------------------------
// WeightFamily

WeightFamily::WeightFamily(const WeightParams& p, int sign_a3)
    : p_(p), cut_(p.mu_or_default(), sign_a3) {
  p_.validate();
}

WeightFamily::WeightFamily(const WeightParams& p, int sign_a3,
                           double torus_half_length)
    : p_(p), cut_(p.mu_or_default(), sign_a3), torus_L_(torus_half_length) {
  p_.validate();
  if (!(torus_L_ > 0.0))
    throw Error("WeightFamily: torus half-length must be positive");
}

// Even analytic taper 0.5 (1 - tanh((|x|-c)/s)): spectrally compact, so the
// symbol expansions converge at the collar; the residual value at the seam
// (~e^{-2(L-c)/s}) sits far below the calculus tolerances.
double WeightFamily::window(double x) const {
  if (!windowed()) return 1.0;
  const double a = p_.taper_inner * torus_L_, b = p_.taper_outer * torus_L_;
  const double c = 0.5 * (a + b), s = 0.2 * (b - a);
  return 0.5 * (1.0 - std::tanh((std::abs(x) - c) / s));
}

double WeightFamily::window_d1(double x) const {
  if (!windowed()) return 0.0;
  const double a = p_.taper_inner * torus_L_, b = p_.taper_outer * torus_L_;
  const double c = 0.5 * (a + b), s = 0.2 * (b - a);
  const double u = (std::abs(x) - c) / s;
  const double sech2 = 1.0 / std::pow(std::cosh(u), 2);
  return -0.5 * sech2 / s * sgn(x);
}

double WeightFamily::window_d2(double x) const {
  if (!windowed()) return 0.0;
  const double a = p_.taper_inner * torus_L_, b = p_.taper_outer * torus_L_;
  const double c = 0.5 * (a + b), s = 0.2 * (b - a);
  const double u = (std::abs(x) - c) / s;
  const double sech2 = 1.0 / std::pow(std::cosh(u), 2);
  return sech2 * std::tanh(u) / (s * s);
}

double WeightFamily::integrand(double y, double s, double expo) const {
  const double br = bracket(y, 1.0);
  return std::pow(br, -expo) * cut_.psi(br / s);
}

double WeightFamily::integral(double x, double xi, double expo) const {
  if (x == 0.0) return 0.0;
  const double s = bracket(xi, p_.h);
  const double s2 = s * s;
  const double cut = std::sqrt(std::max(s2 * s2 - 1.0, 0.0));
  const double upper = std::min(std::abs(x), cut);
  if (upper <= 0.0) return 0.0;
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&](double y) { return integrand(y, s2, expo); }, 0.0, upper, 12, 1e-10,
      &err);
  if (!(err <= 1e-7 * std::max(1.0, std::abs(val))))
    throw QuadratureError("weight integral did not converge");
  return sgn(x) * val;
}

double WeightFamily::lambda2_raw(double x, double xi) const {
  if (p_.M2 == 0.0) return 0.0;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return 0.0;
  return p_.M2 * wv * integral(x, xi, p_.sigma);
}

double WeightFamily::lambda1_raw(double x, double xi) const {
  if (p_.M1 == 0.0) return 0.0;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return 0.0;
  return p_.M1 * wv * integral(x, xi, 0.5 * p_.sigma) / bracket(xi, p_.h);
}

double WeightFamily::lambda2(double x, double xi) const {
  const double v = lambda2_raw(x, xi);
  return windowed() ? v * window(x) : v;
}

double WeightFamily::lambda1(double x, double xi) const {
  const double v = lambda1_raw(x, xi);
  return windowed() ? v * window(x) : v;
}

double WeightFamily::lambda_tilde(double x, double xi) const {
  return lambda2(x, xi) + lambda1(x, xi);
}

double WeightFamily::dx_lambda2_raw(double x, double xi) const {
  if (p_.M2 == 0.0) return 0.0;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return 0.0;
  const double brx = bracket(x, 1.0);
  const double s2 = std::pow(bracket(xi, p_.h), 2);
  return p_.M2 * wv * std::pow(brx, -p_.sigma) * cut_.psi(brx / s2);
}

double WeightFamily::dxx_lambda2_raw(double x, double xi) const {
  if (p_.M2 == 0.0) return 0.0;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return 0.0;
  const double brx = bracket(x, 1.0);
  const double s2 = std::pow(bracket(xi, p_.h), 2);
  const double dbrx = x / brx;
  return p_.M2 * wv *
         (-p_.sigma * std::pow(brx, -p_.sigma - 1.0) * dbrx * cut_.psi(brx / s2) +
          std::pow(brx, -p_.sigma) * cut_.dpsi(brx / s2) * dbrx / s2);
}

double WeightFamily::dx_lambda1_raw(double x, double xi) const {
  if (p_.M1 == 0.0) return 0.0;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return 0.0;
  const double brx = bracket(x, 1.0);
  const double brxi = bracket(xi, p_.h);
  return p_.M1 * wv / brxi * std::pow(brx, -0.5 * p_.sigma) *
         cut_.psi(brx / (brxi * brxi));
}

double WeightFamily::dxx_lambda1_raw(double x, double xi) const {
  if (p_.M1 == 0.0) return 0.0;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return 0.0;
  const double brx = bracket(x, 1.0);
  const double brxi = bracket(xi, p_.h);
  const double s2 = brxi * brxi;
  const double dbrx = x / brx;
  const double e = 0.5 * p_.sigma;
  return p_.M1 * wv / brxi *
         (-e * std::pow(brx, -e - 1.0) * dbrx * cut_.psi(brx / s2) +
          std::pow(brx, -e) * cut_.dpsi(brx / s2) * dbrx / s2);
}

double WeightFamily::dx_lambda2(double x, double xi) const {
  if (!windowed()) return dx_lambda2_raw(x, xi);
  return dx_lambda2_raw(x, xi) * window(x) + lambda2_raw(x, xi) * window_d1(x);
}

double WeightFamily::dx_lambda1(double x, double xi) const {
  if (!windowed()) return dx_lambda1_raw(x, xi);
  return dx_lambda1_raw(x, xi) * window(x) + lambda1_raw(x, xi) * window_d1(x);
}

double WeightFamily::dxx_lambda2(double x, double xi) const {
  if (!windowed()) return dxx_lambda2_raw(x, xi);
  return dxx_lambda2_raw(x, xi) * window(x) +
         2.0 * dx_lambda2_raw(x, xi) * window_d1(x) +
         lambda2_raw(x, xi) * window_d2(x);
}

double WeightFamily::dxx_lambda1(double x, double xi) const {
  if (!windowed()) return dxx_lambda1_raw(x, xi);
  return dxx_lambda1_raw(x, xi) * window(x) +
         2.0 * dx_lambda1_raw(x, xi) * window_d1(x) +
         lambda1_raw(x, xi) * window_d2(x);
}

double WeightFamily::dx_lambda_tilde(double x, double xi) const {
  return dx_lambda2(x, xi) + dx_lambda1(x, xi);
}

double WeightFamily::dxx_lambda_tilde(double x, double xi) const {
  return dxx_lambda2(x, xi) + dxx_lambda1(x, xi);
}

double WeightFamily::d3x_lambda_tilde(double x, double xi) const {
  const double dx = 1e-3 * (1.0 + std::abs(x));
  return point_fd([&](double xx) { return dxx_lambda_tilde(xx, xi); }, x, dx, 1);
}

double WeightFamily::fd_step(double xi) const {
  return 0.02 * std::min(p_.h, bracket(xi, p_.h));
}

namespace {

template <typename F>
double mixed_impl(const F& dx_eval, double x, double xi, int alpha,
                  double step) {
  return point_fd([&](double z) { return dx_eval(x, z); }, xi, step, alpha);
}

}  // namespace

double WeightFamily::mixed_lambda2(double x, double xi, int alpha,
                                   int beta) const {
  auto base = [this, beta](double xx, double zz) -> double {
    switch (beta) {
      case 0:
        return lambda2(xx, zz);
      case 1:
        return dx_lambda2(xx, zz);
      case 2:
        return dxx_lambda2(xx, zz);
      case 3: {
        const double dx = 1e-3 * (1.0 + std::abs(xx));
        return point_fd([&](double w) { return dxx_lambda2(w, zz); }, xx, dx, 1);
      }
      default:
        throw SizeGuardError("mixed_lambda2: beta beyond analytic chain");
    }
  };
  if (alpha == 0) return base(x, xi);
  return mixed_impl(base, x, xi, alpha, fd_step(xi));
}

double WeightFamily::mixed_lambda1(double x, double xi, int alpha,
                                   int beta) const {
  auto base = [this, beta](double xx, double zz) -> double {
    switch (beta) {
      case 0:
        return lambda1(xx, zz);
      case 1:
        return dx_lambda1(xx, zz);
      case 2:
        return dxx_lambda1(xx, zz);
      case 3: {
        const double dx = 1e-3 * (1.0 + std::abs(xx));
        return point_fd([&](double w) { return dxx_lambda1(w, zz); }, xx, dx, 1);
      }
      default:
        throw SizeGuardError("mixed_lambda1: beta beyond analytic chain");
    }
  };
  if (alpha == 0) return base(x, xi);
  return mixed_impl(base, x, xi, alpha, fd_step(xi));
}

double WeightFamily::mixed_lambda_tilde(double x, double xi, int alpha,
                                        int beta) const {
  return mixed_lambda2(x, xi, alpha, beta) + mixed_lambda1(x, xi, alpha, beta);
}

namespace {

// Incremental quadrature of int_0^{|x|} f for an ascending list of |x| values.
template <typename F>
std::vector<double> cumulative_segments(const std::vector<double>& absx,
                                        const F& f, double cut) {
  std::vector<double> out(absx.size(), 0.0);
  double acc = 0.0;
  double prev = 0.0;
  for (size_t i = 0; i < absx.size(); ++i) {
    const double hi = std::min(absx[i], cut);
    if (hi > prev) {
      acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          f, prev, hi, 10, 1e-11);
      prev = hi;
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace

std::vector<double> WeightFamily::lambda2_column(const std::vector<double>& xs,
                                                 double xi) const {
  std::vector<double> out(xs.size(), 0.0);
  if (p_.M2 == 0.0) return out;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return out;
  const double s = bracket(xi, p_.h);
  const double s2 = s * s;
  const double cut = std::sqrt(std::max(s2 * s2 - 1.0, 0.0));
  std::vector<double> absx(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) absx[i] = std::abs(xs[i]);
  std::vector<size_t> order(xs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return absx[a] < absx[b]; });
  std::vector<double> sorted(xs.size());
  for (size_t i = 0; i < order.size(); ++i) sorted[i] = absx[order[i]];
  auto vals = cumulative_segments(
      sorted, [&](double y) { return integrand(y, s2, p_.sigma); }, cut);
  for (size_t i = 0; i < order.size(); ++i)
    out[order[i]] = p_.M2 * wv * sgn(xs[order[i]]) * vals[i] * window(xs[order[i]]);
  return out;
}

std::vector<double> WeightFamily::lambda1_column(const std::vector<double>& xs,
                                                 double xi) const {
  std::vector<double> out(xs.size(), 0.0);
  if (p_.M1 == 0.0) return out;
  const double wv = cut_.w(xi / p_.h);
  if (wv == 0.0) return out;
  const double s = bracket(xi, p_.h);
  const double s2 = s * s;
  const double cut = std::sqrt(std::max(s2 * s2 - 1.0, 0.0));
  std::vector<double> absx(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) absx[i] = std::abs(xs[i]);
  std::vector<size_t> order(xs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return absx[a] < absx[b]; });
  std::vector<double> sorted(xs.size());
  for (size_t i = 0; i < order.size(); ++i) sorted[i] = absx[order[i]];
  auto vals = cumulative_segments(
      sorted, [&](double y) { return integrand(y, s2, 0.5 * p_.sigma); }, cut);
  for (size_t i = 0; i < order.size(); ++i)
    out[order[i]] = p_.M1 * wv * sgn(xs[order[i]]) * vals[i] / s * window(xs[order[i]]);
  return out;
}

std::vector<double> WeightFamily::lambda_tilde_column(
    const std::vector<double>& xs, double xi) const {
  auto l2 = lambda2_column(xs, xi);
  auto l1 = lambda1_column(xs, xi);
  for (size_t i = 0; i < l2.size(); ++i) l2[i] += l1[i];
  return l2;
}

Symbol WeightFamily::exp_tilde_symbol(const GridSpec& g, int sign) const {
  const int n = g.size();
  std::vector<double> xs(n);
  for (int j = 0; j < n; ++j) xs[j] = g.point(j);
  Eigen::MatrixXcd t(n, n);
  for (int i = 0; i < n; ++i) {
    const double xi = g.freq(i);
    auto l2 = lambda2_column(xs, xi);
    auto l1 = lambda1_column(xs, xi);
    for (int j = 0; j < n; ++j) {
      const double e = std::exp(sign * (l2[j] + l1[j]));
      if (!std::isfinite(e))
        throw OverflowError("exp_tilde_symbol: weight overflow");
      t(j, i) = e;
    }
  }
  return Symbol(g, std::move(t), 0.0, 0.0, p_.mu_or_default());
}

Eigen::MatrixXcd WeightFamily::dxi_dx_lambda2_table(const GridSpec& g) const {
  const int n = g.size();
  Eigen::MatrixXcd t(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      t(j, i) = mixed_lambda2(g.point(j), g.freq(i), 1, 1);
  return t;
}

// ---------------------------------------------------------------------------
// Lambda_{rho',k}

double capital_lambda(double t, double xi, const WeightParams& p) {
  const double br = bracket(xi, p.h);
  return p.rho_prime * std::pow(br, 1.0 / p.theta) +
         p.k * (p.T - t) * std::pow(br, 2.0 * (1.0 - p.sigma));
}

double capital_lambda_exp_ratio(double t, double xi, int alpha,
                                const WeightParams& p) {
  if (alpha == 0) return 1.0;
  const double base = capital_lambda(t, xi, p);
  const double delta = 0.01 * bracket(xi, p.h);
  auto f = [&](double z) { return std::exp(capital_lambda(t, z, p) - base); };
  return point_fd(f, xi, delta, alpha);
}

// ---------------------------------------------------------------------------
// Lemma scans

namespace {

std::vector<double> xi_scan_points(double h) {
  std::vector<double> base = {0.0,      0.3 * h, 0.7 * h,  0.95 * h,
                              1.05 * h, 1.2 * h, 1.5 * h,  1.8 * h,
                              2.05 * h, 2.5 * h, 3.0 * h,  4.0 * h,
                              6.0 * h};
  std::vector<double> out;
  for (double v : base) {
    out.push_back(v);
    if (v != 0.0) out.push_back(-v);
  }
  return out;
}

std::vector<double> x_scan_points(double h, double xi) {
  std::vector<double> out = {0.0, 0.3, 0.7, 1.5, 3.0, 6.0, 12.0, 25.0};
  const double s2 = std::pow(bracket(xi, h), 2);
  // the psi transition sits at <x> in [s2/2, s2]
  for (double frac : {0.4, 0.55, 0.75, 0.95, 1.1}) {
    const double target = frac * s2;
    if (target > 1.0) out.push_back(std::sqrt(target * target - 1.0));
  }
  std::vector<double> sym;
  for (double v : out) {
    sym.push_back(v);
    if (v != 0.0) sym.push_back(-v);
  }
  return sym;
}

void update_report(WeightScanReport& rep, double ratio, double x, double xi,
                   int alpha, int beta) {
  if (!std::isfinite(ratio)) {
    rep.finite = false;
    return;
  }
  if (ratio > rep.worst_ratio) {
    rep.worst_ratio = ratio;
    rep.worst_x = x;
    rep.worst_xi = xi;
    rep.worst_alpha = alpha;
    rep.worst_beta = beta;
  }
  rep.fitted_C =
      std::max(rep.fitted_C, std::pow(ratio, 1.0 / (alpha + beta + 1)));
}

}  // namespace

LambdaEstimatesResult verify_lambda_estimates(WhichLambda which,
                                              const WeightParams& params,
                                              int sign_a3, int alpha_max,
                                              int beta_max) {
  if (alpha_max > 4 || beta_max > 3)
    throw SizeGuardError("verify_lambda_estimates: depth beyond stencil set");
  WeightFamily fam(params, sign_a3);
  const double sigma = params.sigma;
  const double mu = params.mu_or_default();
  const double h = params.h;
  const double M = (which == WhichLambda::Lambda2) ? params.M2 : params.M1;

  LambdaEstimatesResult res;
  if (M == 0.0) return res;  // all derivatives vanish, ratios are zero

  for (double xi : xi_scan_points(h)) {
    const double brxi = bracket(xi, h);
    for (double x : x_scan_points(h, xi)) {
      const double brx = bracket(x, 1.0);
      for (int beta = 0; beta <= beta_max; ++beta) {
        for (int alpha = 0; alpha <= alpha_max; ++alpha) {
          const double val = (which == WhichLambda::Lambda2)
                                 ? fam.mixed_lambda2(x, xi, alpha, beta)
                                 : fam.mixed_lambda1(x, xi, alpha, beta);
          const double fac =
              std::pow(factorial(alpha) * factorial(beta), mu);
          if (beta == 0) {
            double envelope;
            if (which == WhichLambda::Lambda2) {
              envelope = std::min(std::pow(brxi, 2.0 * (1.0 - sigma)),
                                  std::pow(brx, 1.0 - sigma));
            } else {
              envelope = std::min({std::pow(brxi, 1.0 - sigma),
                                   std::pow(brx, 1.0 - 0.5 * sigma) / brxi,
                                   std::pow(brx, 0.5 * (1.0 - sigma))});
            }
            const double denom =
                M * fac * std::pow(brxi, -alpha) * envelope;
            update_report(res.part_i, std::abs(val) / denom, x, xi, alpha, beta);
          } else {
            double envelope;
            if (which == WhichLambda::Lambda2) {
              envelope = std::pow(brx, -sigma - beta + 1.0);
            } else {
              envelope = std::pow(brx, -0.5 * sigma - beta + 1.0) *
                         std::min(1.0 / brxi, std::pow(brx, -0.5 * sigma));
            }
            const double denom =
                M * fac * std::pow(brxi, -alpha) * envelope;
            update_report(res.part_ii, std::abs(val) / denom, x, xi, alpha,
                          beta);
            // stronger hypothesis: order-zero behavior for beta >= 1
            const double denom0 = fac * std::pow(brxi, -alpha);
            update_report(res.order_zero, std::abs(val) / denom0, x, xi, alpha,
                          beta);
          }
        }
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Inversion and Q

NeumannInverse invert_e_lambda(const GridSpec& g, const WeightParams& params,
                               int sign_a3, int max_terms) {
  WeightFamily fam(params, sign_a3, g.half_length);
  return invert_e_lambda(g, fam, max_terms);
}

NeumannInverse invert_e_lambda(const GridSpec& g, const WeightFamily& fam,
                               int max_terms) {
  Symbol plus = fam.exp_tilde_symbol(g, +1);
  Symbol minus = fam.exp_tilde_symbol(g, -1);
  Eigen::MatrixXcd a = quantize_matrix(plus);
  Eigen::MatrixXcd rv = reverse_quantize_matrix(minus);
  Eigen::MatrixXcd pi = nyquist_projector(g);

  NeumannInverse out;
  out.r = a * rv - pi;
  out.r_norm = operator_norm(out.r);
  if (out.r_norm >= 1.0)
    throw DivergenceError(
        "invert_e_lambda: measured ||r|| >= 1; raise the bracket parameter h");

  Eigen::MatrixXcd series = pi;
  Eigen::MatrixXcd power = pi;
  int terms = 0;
  for (int j = 1; j <= max_terms; ++j) {
    power = -out.r * power;
    series += power;
    terms = j;
    if (power.norm() < 1e-10) break;
  }
  out.terms_used = terms;
  out.inverse = rv * series;
  out.residual = operator_norm(a * out.inverse - pi);
  return out;
}

std::vector<HSweepEntry> sweep_inversion_h(const GridSpec& g,
                                           WeightParams params, int sign_a3,
                                           double h_first, double h_max) {
  std::vector<HSweepEntry> out;
  for (double h = h_first; h <= h_max; h *= 2.0) {
    params.h = h;
    WeightFamily fam(params, sign_a3, g.half_length);
    HSweepEntry e;
    e.h = h;
    try {
      Symbol plus = fam.exp_tilde_symbol(g, +1);
      Symbol minus = fam.exp_tilde_symbol(g, -1);
      Eigen::MatrixXcd r = quantize_matrix(plus) * reverse_quantize_matrix(minus) -
                           nyquist_projector(g);
      e.r_norm = operator_norm(r);
      e.invertible = e.r_norm < 1.0;
    } catch (const OverflowError&) {
      e.r_norm = std::numeric_limits<double>::infinity();
      e.invertible = false;
    }
    out.push_back(e);
    if (e.r_norm < 0.5) break;
  }
  return out;
}

GridFunction QOperator::apply(const GridFunction& u) const {
  GridFunction mid = quantize_apply(exp_tilde, u);
  return fourier_multiplier(
      [this](double xi) { return cplx(std::exp(capital_lambda(t, xi, params)), 0.0); },
      mid);
}

GridFunction QOperator::inverse_apply(const GridFunction& w) const {
  GridFunction mid = fourier_multiplier(
      [this](double xi) { return cplx(std::exp(-capital_lambda(t, xi, params)), 0.0); },
      w);
  return apply_matrix(tilde_inverse.inverse, mid);
}

Eigen::MatrixXcd QOperator::matrix() const {
  Symbol mult = multiplier_symbol(
      grid,
      [this](double xi) { return cplx(std::exp(capital_lambda(t, xi, params)), 0.0); },
      0.0);
  return quantize_matrix(mult) * op_tilde;
}

Eigen::MatrixXcd QOperator::inverse_matrix() const {
  Symbol mult = multiplier_symbol(
      grid,
      [this](double xi) { return cplx(std::exp(-capital_lambda(t, xi, params)), 0.0); },
      0.0);
  return tilde_inverse.inverse * quantize_matrix(mult);
}

QOperator build_Q(const GridSpec& g, const WeightParams& params, int sign_a3,
                  double t, int max_terms) {
  params.validate();
  WeightFamily fam(params, sign_a3, g.half_length);
  QOperator q;
  q.grid = g;
  q.params = params;
  q.sign_a3 = sign_a3;
  q.t = t;
  q.exp_tilde = fam.exp_tilde_symbol(g, +1);
  q.op_tilde = quantize_matrix(q.exp_tilde);
  q.tilde_inverse = invert_e_lambda(g, fam, max_terms);
  return q;
}

}  // namespace kdvlab
