#include "kdvlab/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

namespace kdvlab::fft {

namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex plan_mutex;

// FFTW planning is not thread-safe; executing a cached plan on fresh buffers
// via fftw_execute_dft is.  Plans are created FFTW_UNALIGNED so they accept
// whatever std::vector hands us.
PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<fftw_complex> buf(static_cast<size_t>(n));
  PlanPair p;
  p.fwd = fftw_plan_dft_1d(n, buf.data(), buf.data(), FFTW_FORWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.bwd = fftw_plan_dft_1d(n, buf.data(), buf.data(), FFTW_BACKWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(n, p).first->second;
}

void run(const std::vector<std::complex<double>>& in,
         std::vector<std::complex<double>>& out, bool forward_dir) {
  const int n = static_cast<int>(in.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    PlanPair& p = plans_for(n);
    plan = forward_dir ? p.fwd : p.bwd;
  }
  out.resize(in.size());
  // fftw_execute_dft allows in == out only for in-place plans; copy instead.
  std::vector<std::complex<double>> tmp(in);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(tmp.data()),
                   reinterpret_cast<fftw_complex*>(tmp.data()));
  out = std::move(tmp);
}

}  // namespace

void forward(const std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out) {
  run(in, out, true);
}

void backward(const std::vector<std::complex<double>>& in,
              std::vector<std::complex<double>>& out) {
  run(in, out, false);
}

}  // namespace kdvlab::fft
