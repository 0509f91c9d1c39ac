#pragma once

#include <complex>

#include "nfsr/array2d.hpp"

namespace nfsr::fft {

enum class Sign { Forward = -1, Backward = +1 };

// Unnormalized 2D DFT in place: X[m,n] = sum x[r,c] exp(sign * 2*pi*i*(m r/R + n c/C)).
// Reentrant: plans are created under a process-wide lock, execution is lock-free.
void dft2d(Array2D<std::complex<double>>& data, Sign sign);

// Orthonormal 2D DCT-II and its inverse (DCT-III).
Array2D<double> dct2d(const Array2D<double>& in);
Array2D<double> idct2d(const Array2D<double>& in);

}  // namespace nfsr::fft
