#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kdvlab/errors.hpp"
#include "kdvlab/quantize.hpp"
#include "kdvlab/spectral.hpp"
#include "support/testutil.hpp"

using namespace kdvlab;
using testutil::random_band_limited;

namespace {

Symbol identity_symbol(const GridSpec& g) {
  return make_symbol(g, [](double, double) { return cplx(1.0); }, 0, 0, 1.5);
}

Symbol derivative_symbol(const GridSpec& g) {
  return make_symbol(g, [](double, double xi) { return cplx(0.0, xi); }, 1, 0, 1.5);
}

}  // namespace

TEST_CASE("op(1) is the identity on band-limited data") {
  GridSpec g(5.0, 64);
  auto u = random_band_limited(g, 1);
  auto v = quantize_apply(identity_symbol(g), u);
  CHECK(linf_diff(u, v) <= 1e-12 * (1.0 + linf_norm(u)));
}

TEST_CASE("op(i xi) is the spectral derivative") {
  GridSpec g(6.0, 64);
  auto u = random_band_limited(g, 2);
  auto got = quantize_apply(derivative_symbol(g), u);
  auto want = spectral_derivative(u, 1);
  CHECK(linf_diff(got, want) <= 1e-11 * (1.0 + linf_norm(want)));
}

TEST_CASE("xi-independent symbol is a multiplication operator") {
  GridSpec g(6.0, 64);
  const double kx = M_PI / g.half_length;
  auto a = [&](double x) {
    return cplx(0.7 + 0.3 * std::cos(kx * x), 0.1 * std::sin(2.0 * kx * x));
  };
  auto p = make_symbol(g, [&](double x, double) { return a(x); }, 0, 0, 1.5);
  auto u = random_band_limited(g, 3);
  auto got = quantize_apply(p, u);
  GridFunction want(g);
  for (int j = 0; j < g.size(); ++j) want[j] = a(g.point(j)) * u[j];
  CHECK(linf_diff(got, want) <= 1e-12 * (1.0 + linf_norm(want)));
}

TEST_CASE("op(p) is linear") {
  GridSpec g(5.0, 64);
  auto p = make_symbol(
      g, [](double x, double xi) { return cplx(std::sin(x) + xi * xi, 0.5 * xi); },
      2, 0, 1.5);
  auto u = random_band_limited(g, 4);
  auto v = random_band_limited(g, 5);
  const cplx a(1.3, -0.4), b(-0.2, 0.9);
  auto lhs = quantize_apply(p, a * u + b * v);
  auto rhs = a * quantize_apply(p, u) + b * quantize_apply(p, v);
  CHECK(linf_diff(lhs, rhs) <= 1e-12 * (1.0 + linf_norm(rhs)));
}

TEST_CASE("quantize_matrix: identity symbol gives the subspace projector") {
  GridSpec g(4.0, 32);
  auto m = quantize_matrix(identity_symbol(g));
  auto pi = nyquist_projector(g);
  CHECK((m - pi).norm() <= 1e-12 * pi.norm());
}

TEST_CASE("quantize_matrix agrees with multiplier route on basis vectors") {
  GridSpec g(4.0, 32);
  auto m = quantize_matrix(derivative_symbol(g));
  for (int l = 0; l < g.size(); ++l) {
    GridFunction e(g);
    e[l] = cplx(1.0);
    auto via_mult = fourier_multiplier([](double xi) { return cplx(0.0, xi); }, e);
    auto via_mat = apply_matrix(m, e);
    CHECK(linf_diff(via_mult, via_mat) <= 1e-10);
  }
}

TEST_CASE("matrix and direct application agree on random data") {
  GridSpec g(5.0, 64);
  auto p = make_symbol(
      g,
      [](double x, double xi) {
        return cplx(std::cos(0.5 * x) * xi, std::sin(x) + 0.1 * xi * xi);
      },
      2, 0, 1.5);
  auto m = quantize_matrix(p);
  for (unsigned seed = 0; seed < 20; ++seed) {
    auto u = random_band_limited(g, 100 + seed);
    auto d = quantize_apply(p, u);
    auto v = apply_matrix(m, u);
    CHECK(linf_diff(d, v) <= 1e-10 * (1.0 + linf_norm(d)));
  }
}

TEST_CASE("quantize_matrix dense ceiling") {
  GridSpec g(5.0, 2048);
  CHECK_THROWS_AS(quantize_matrix(identity_symbol(g)), SizeGuardError);
}

TEST_CASE("reverse quantization: identity and multiplier collapse") {
  GridSpec g(5.0, 64);
  auto u = random_band_limited(g, 9);
  auto v = reverse_quantize_apply(identity_symbol(g), u);
  CHECK(linf_diff(u, v) <= 1e-12 * (1.0 + linf_norm(u)));

  auto p = multiplier_symbol(
      g, [](double xi) { return cplx(1.0 / (1.0 + xi * xi), 0.3 * xi); }, 0);
  auto got = reverse_quantize_apply(p, u);
  auto want = fourier_multiplier(
      [](double xi) { return cplx(1.0 / (1.0 + xi * xi), 0.3 * xi); }, u);
  CHECK(linf_diff(got, want) <= 1e-12 * (1.0 + linf_norm(want)));
}

TEST_CASE("reverse operator transpose and adjoint identities") {
  GridSpec g(5.0, 64);
  auto psym = [](double x, double xi) {
    return cplx(std::exp(-0.2 * x * x) * (1.0 + 0.3 * xi),
                0.1 * std::sin(x) * xi);
  };
  auto p = make_symbol(g, psym, 1, 0, 1.5);
  auto p_reflected = make_symbol(
      g, [&](double x, double xi) { return psym(x, -xi); }, 1, 0, 1.5);
  auto p_conj = make_symbol(
      g, [&](double x, double xi) { return std::conj(psym(x, xi)); }, 1, 0, 1.5);
  const double w = g.dx();

  for (unsigned seed = 0; seed < 5; ++seed) {
    auto u = random_band_limited(g, 200 + seed);
    auto v = random_band_limited(g, 300 + seed);
    auto ru = reverse_quantize_apply(p, u);

    // bilinear transpose: (R{p}u, v) = (u, op(p(x,-xi)) v)
    auto qv = quantize_apply(p_reflected, v);
    cplx lhs_b(0.0), rhs_b(0.0);
    for (int j = 0; j < g.size(); ++j) {
      lhs_b += ru[j] * v[j];
      rhs_b += u[j] * qv[j];
    }
    lhs_b *= w;
    rhs_b *= w;
    CHECK(std::abs(lhs_b - rhs_b) <= 1e-10 * (1.0 + std::abs(lhs_b)));

    // sesquilinear adjoint: <R{p}u, v> = <u, op(conj p) v>
    auto av = quantize_apply(p_conj, v);
    cplx lhs_a(0.0), rhs_a(0.0);
    for (int j = 0; j < g.size(); ++j) {
      lhs_a += ru[j] * std::conj(v[j]);
      rhs_a += u[j] * std::conj(av[j]);
    }
    CHECK(std::abs(lhs_a - rhs_a) * w <= 1e-10 * (1.0 + std::abs(lhs_a) * w));
  }
}

TEST_CASE("composition: unit symbol") {
  GridSpec g(5.0, 64);
  auto q = make_symbol(
      g, [](double x, double xi) { return cplx(std::sin(x), 0.2 * xi); }, 1, 0, 1.5);
  auto s = compose_asymptotic(identity_symbol(g), q, 3);
  CHECK((s.table - q.table).cwiseAbs().maxCoeff() <= 1e-12);
  auto s2 = compose_asymptotic(q, identity_symbol(g), 3);
  CHECK((s2.table - q.table).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("composition: exact Leibniz case p = i xi, q = a(x)") {
  GridSpec g(6.0, 64);
  const double kx = M_PI / g.half_length;
  auto a = [&](double x) { return std::exp(std::cos(kx * x)); };
  auto da = [&](double x) { return -kx * std::sin(kx * x) * a(x); };
  auto p = derivative_symbol(g);
  auto q = make_symbol(g, [&](double x, double) { return cplx(a(x), 0.0); }, 0, 0, 1.5);
  auto s = compose_asymptotic(p, q, 2);

  // symbol check: s = i xi a(x) + a'(x)
  auto want = make_symbol(
      g, [&](double x, double xi) { return cplx(da(x), xi * a(x)); }, 1, 0, 1.5);
  CHECK((s.table - want.table).cwiseAbs().maxCoeff() <= 1e-8);

  // operator check on random data
  for (unsigned seed = 0; seed < 5; ++seed) {
    auto u = random_band_limited(g, 400 + seed);
    auto via_s = quantize_apply(s, u);
    auto via_pq = quantize_apply(p, quantize_apply(q, u));
    CHECK(linf_diff(via_s, via_pq) <= 1e-8 * (1.0 + linf_norm(via_pq)));
  }
}

TEST_CASE("composition remainder shrinks as terms are added") {
  GridSpec g(6.0, 64);
  auto p = make_symbol(
      g, [](double, double xi) { return cplx(xi * xi, 0.0); }, 2, 0, 1.5);
  const double kq = M_PI / g.half_length;
  auto q = make_symbol(
      g, [&](double x, double) { return cplx(std::exp(std::cos(kq * x)), 0.0); },
      0, 0, 1.5);
  auto u = random_band_limited(g, 77, 8);
  auto exact = quantize_apply(p, quantize_apply(q, u));
  std::vector<double> resid;
  for (int n = 1; n <= 3; ++n) {
    auto s = compose_asymptotic(p, q, n);
    resid.push_back(linf_diff(quantize_apply(s, u), exact));
  }
  MESSAGE("composition residuals: ", resid[0], " ", resid[1], " ", resid[2]);
  CHECK(resid[1] <= resid[0]);
  CHECK(resid[2] <= resid[1]);
  // p is a degree-2 polynomial in xi: 3 terms are exact
  CHECK(resid[2] <= 1e-8 * (1.0 + linf_norm(exact)));
}

TEST_CASE("seminorm scan: constant symbol in S^0") {
  GridSpec g(5.0, 32);
  SymbolClassSpec cls{SymbolClassSpec::Kind::S, 0.0, 0.0, 1.0};
  auto rep = estimate_seminorm(identity_symbol(g), cls, 2, 2);
  CHECK(rep.fitted_A == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.worst_ratio <= 1.0 + 1e-9);
  CHECK(rep.finite);
}

TEST_CASE("seminorm scan: bracket symbol in S^1") {
  GridSpec g(5.0, 64, 2.0);
  auto p = make_symbol(
      g, [&](double, double xi) { return cplx(bracket(xi, 2.0), 0.0); }, 1, 0, 1.0);
  SymbolClassSpec cls{SymbolClassSpec::Kind::S, 1.0, 0.0, 1.0};
  auto rep = estimate_seminorm(p, cls, 3, 3);
  CHECK(rep.finite);
  CHECK(rep.fitted_A > 0.0);
  CHECK(std::isfinite(rep.fitted_A));
}

TEST_CASE("hermitian split") {
  GridSpec g(5.0, 48);
  SUBCASE("real even multiplier is self-adjoint") {
    auto p = multiplier_symbol(
        g, [&](double xi) { return cplx(bracket(xi, 1.0) * bracket(xi, 1.0), 0.0); },
        2);
    auto [h, a] = hermitian_split(p);
    CHECK(a.cwiseAbs().maxCoeff() <= 1e-12 * h.cwiseAbs().maxCoeff());
  }
  SUBCASE("derivative symbol is skew-adjoint") {
    auto [h, a] = hermitian_split(derivative_symbol(g));
    CHECK(h.cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
  }
  SUBCASE("reconstruction and skew part annihilate real parts") {
    auto p = make_symbol(
        g, [](double x, double xi) { return cplx(std::sin(x) * xi, 0.3 * xi * xi); },
        2, 0, 1.5);
    auto [h, a] = hermitian_split(p);
    auto m = quantize_matrix(p);
    CHECK((h + a - m).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (unsigned seed = 0; seed < 20; ++seed) {
      auto u = random_band_limited(g, 500 + seed);
      auto au = apply_matrix(a, u);
      cplx ip(0.0);
      for (int j = 0; j < g.size(); ++j) ip += au[j] * std::conj(u[j]);
      double nu = 0.0;
      for (int j = 0; j < g.size(); ++j) nu += std::norm(u[j]);
      CHECK(std::abs(ip.real()) <= 1e-12 * nu);
    }
  }
}

TEST_CASE("garding floor") {
  GridSpec g(5.0, 48);
  SUBCASE("nonnegative multiplier") {
    auto p = multiplier_symbol(
        g, [&](double xi) { return cplx(1.0 + xi * xi, 0.0); }, 2);
    CHECK(garding_floor(p) >= -1e-10);
  }
  SUBCASE("constant -1") {
    auto p = multiplier_symbol(g, [](double) { return cplx(-1.0, 0.0); }, 0);
    // the Nyquist line is annihilated, so the floor of op(-1) sits at -1
    CHECK(garding_floor(p) == doctest::Approx(-1.0).epsilon(1e-10));
  }
  SUBCASE("decaying-coefficient heat symbol is stable under refinement") {
    const double sigma = 0.75;
    auto floor_at = [&](int n) {
      GridSpec gg(5.0, n);
      auto p = make_symbol(
          gg,
          [&](double x, double xi) {
            return cplx(std::pow(bracket(x, 1.0), -sigma) * xi * xi, 0.0);
          },
          2, 0, 1.5);
      return garding_floor(p);
    };
    const double f128 = floor_at(128);
    const double f256 = floor_at(256);
    MESSAGE("garding floors: N=128 -> ", f128, ", N=256 -> ", f256);
    const double c128 = std::max(-f128, 0.0);
    const double c256 = std::max(-f256, 0.0);
    CHECK(c256 <= 1.5 * std::max(c128, 1e-8));
  }
}

TEST_CASE("continuity: op(p) bounded between gevrey-sobolev levels") {
  GridSpec g(5.0, 64);
  // order-1 symbol with tame x-dependence
  auto p = make_symbol(
      g,
      [](double x, double xi) {
        return cplx(std::exp(-0.2 * x * x) * xi, 0.5 * std::sin(x));
      },
      1, 0, 1.5);
  const GevreyIndex src(1.0, 0.3, 1.6);
  const GevreyIndex dst(0.0, 0.3, 1.6);
  double worst = 0.0;
  for (unsigned seed = 0; seed < 100; ++seed) {
    auto u = random_band_limited(g, 900 + seed, 4, 0.3);
    const double r = gevrey_norm(quantize_apply(p, u), dst) / gevrey_norm(u, src);
    worst = std::max(worst, r);
  }
  CHECK(std::isfinite(worst));
  MESSAGE("continuity constant estimate: ", worst);
}

TEST_CASE("symbol csv round trip") {
  GridSpec g(3.0, 16, 2.0);
  auto p = make_symbol(
      g, [](double x, double xi) { return cplx(x * xi, x - xi); }, 1, 1, 1.4);
  std::stringstream ss;
  write_symbol_csv(p, ss);
  auto q = read_symbol_csv(ss);
  CHECK(q.grid == g);
  CHECK(q.xi_order == doctest::Approx(1.0));
  CHECK((q.table - p.table).cwiseAbs().maxCoeff() <= 1e-12);
}
