#include "nfsr/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>

namespace nfsr::fft {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// fftw_malloc'd buffer: fixed alignment keeps codelet selection (and bits) stable.
template <class T>
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  T* ptr;
};

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

Array2D<double> r2r_2d(const Array2D<double>& in, fftw_r2r_kind kind) {
  const int rows = static_cast<int>(in.rows());
  const int cols = static_cast<int>(in.cols());
  FftwBuffer<double> buf(in.size());
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_r2r_2d(rows, cols, buf.ptr, buf.ptr, kind, kind, FFTW_ESTIMATE));
  }
  std::memcpy(buf.ptr, in.data(), sizeof(double) * in.size());
  fftw_execute(plan.get());
  Array2D<double> out(in.rows(), in.cols());
  std::memcpy(out.data(), buf.ptr, sizeof(double) * in.size());
  return out;
}

}  // namespace

void dft2d(Array2D<std::complex<double>>& data, Sign sign) {
  const int rows = static_cast<int>(data.rows());
  const int cols = static_cast<int>(data.cols());
  FftwBuffer<fftw_complex> buf(data.size());
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_2d(rows, cols, buf.ptr, buf.ptr,
                                sign == Sign::Forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                FFTW_ESTIMATE));
  }
  std::memcpy(buf.ptr, data.data(), sizeof(fftw_complex) * data.size());
  fftw_execute(plan.get());
  std::memcpy(static_cast<void*>(data.data()), buf.ptr, sizeof(fftw_complex) * data.size());
}

Array2D<double> dct2d(const Array2D<double>& in) {
  // FFTW REDFT10 computes 2*sum x_n cos(pi (2n+1) k / 2N) per axis.
  Array2D<double> out = r2r_2d(in, FFTW_REDFT10);
  const double rows = static_cast<double>(in.rows());
  const double cols = static_cast<double>(in.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double sr = std::sqrt(1.0 / (2.0 * rows)) * (r == 0 ? std::sqrt(0.5) : 1.0);
    for (std::size_t c = 0; c < out.cols(); ++c) {
      const double sc = std::sqrt(1.0 / (2.0 * cols)) * (c == 0 ? std::sqrt(0.5) : 1.0);
      out(r, c) *= sr * sc;
    }
  }
  return out;
}

Array2D<double> idct2d(const Array2D<double>& in) {
  // REDFT01 computes X_0 + 2*sum_{k>=1} X_k cos(...); prescale so the result is orthonormal.
  Array2D<double> scaled = in;
  const double rows = static_cast<double>(in.rows());
  const double cols = static_cast<double>(in.cols());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const double sr = r == 0 ? std::sqrt(1.0 / rows) : std::sqrt(2.0 / rows) * 0.5;
    for (std::size_t c = 0; c < in.cols(); ++c) {
      const double sc = c == 0 ? std::sqrt(1.0 / cols) : std::sqrt(2.0 / cols) * 0.5;
      scaled(r, c) *= sr * sc;
    }
  }
  return r2r_2d(scaled, FFTW_REDFT01);
}

}  // namespace nfsr::fft
