#pragma once

#include <complex>
#include <vector>

namespace kdvlab::fft {

// Unnormalized DFT: out_k = sum_j in_j e^{-2 pi i jk/N}.  Plans are cached
// per length behind a mutex; execution is safe to run concurrently.
void forward(const std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out);

// Unnormalized inverse DFT: out_j = sum_k in_k e^{+2 pi i jk/N}.
void backward(const std::vector<std::complex<double>>& in,
              std::vector<std::complex<double>>& out);

}  // namespace kdvlab::fft
