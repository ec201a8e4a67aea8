#pragma once

#include <cmath>
#include <random>

#include "kdvlab/grid.hpp"
#include "kdvlab/spectral.hpp"

namespace kdvlab::testutil {

// Random band-limited function: modes |k| <= N/band_divisor, unit-scale
// Gaussian coefficients, no Nyquist content.
inline GridFunction random_band_limited(const GridSpec& g, unsigned seed,
                                        int band_divisor = 6,
                                        double spectral_decay = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<cplx> coeff(g.size(), cplx(0.0));
  const int kmax = g.n_modes / band_divisor;
  for (int i = 0; i < g.size(); ++i) {
    const int k = g.mode_number(i);
    if (k == -g.n_modes / 2 || std::abs(k) > kmax) continue;
    const double damp = std::exp(-spectral_decay * std::abs(g.freq(i)));
    coeff[i] = cplx(gauss(rng), gauss(rng)) * damp;
  }
  return synthesize(g, coeff);
}

inline GridFunction sech_profile(const GridSpec& g, double scale = 1.0,
                                 double amplitude = 1.0) {
  return sample(g, [=](double x) {
    return cplx(amplitude / std::cosh(scale * x), 0.0);
  });
}

inline double rel_l2_error(const GridFunction& got, const GridFunction& want) {
  const double base = l2_norm(want);
  GridFunction d = got;
  d -= want;
  return l2_norm(d) / (base > 0 ? base : 1.0);
}

}  // namespace kdvlab::testutil
