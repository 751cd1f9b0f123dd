#pragma once

// FFTW-backed transforms shared by the spectral operators. Plans are created
// once per length under a mutex (FFTW planning is not thread safe) and then
// executed through the new-array interface, which is.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace nhdnls::detail {

using cplx = std::complex<double>;

/// Unnormalized forward transform: X_j = sum_k x_k exp(-2 pi i jk/N).
std::vector<cplx> fft(std::span<const cplx> in);
/// Normalized inverse transform (divides by N).
std::vector<cplx> ifft(std::span<const cplx> in);

/// Signed mode number for FFT slot j (Nyquist reported as +N/2).
inline long mode_number(std::size_t j, std::size_t n) {
  return j <= n / 2 ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(n);
}

}  // namespace nhdnls::detail
