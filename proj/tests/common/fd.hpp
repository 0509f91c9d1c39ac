#pragma once

// Central finite-difference oracles shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "nfsr/array2d.hpp"
#include "nfsr/rng.hpp"

namespace nfsr::testing {

inline Array2D<double> random_map(Rng& rng, std::size_t n, double lo = 0.05, double hi = 0.95) {
  Array2D<double> m(n, n);
  for (auto& v : m) v = rng.uniform(lo, hi);
  return m;
}

// Smooth random map in [lo, hi]: a few low-frequency cosines plus mild noise.
inline Array2D<double> smooth_map(Rng& rng, std::size_t n, double lo = 0.1, double hi = 0.9) {
  Array2D<double> m(n, n);
  const double a = rng.uniform(0.5, 2.0), b = rng.uniform(0.5, 2.0), p = rng.uniform(0.0, 6.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double u = static_cast<double>(r) / n, v = static_cast<double>(c) / n;
      const double s = 0.5 + 0.3 * std::cos(a * 6.0 * u + p) * std::cos(b * 6.0 * v) +
                       0.05 * rng.uniform(-1.0, 1.0);
      m(r, c) = lo + (hi - lo) * std::clamp(s, 0.0, 1.0);
    }
  return m;
}

struct FdReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, floor)
  int checked = 0;
};

// Compares `grad` against central differences of `f` at up to `samples` random
// pixels of `x`; pixels where `skip` holds are ignored.
inline FdReport check_gradient(const std::function<double(const Array2D<double>&)>& f,
                               Array2D<double> x, const Array2D<double>& grad, Rng& rng,
                               int samples, double h = 1e-4, double floor = 1e-8,
                               const std::function<bool(std::size_t, std::size_t)>& skip = {}) {
  FdReport rep;
  for (int s = 0; s < samples; ++s) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(x.rows()) - 1));
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(x.cols()) - 1));
    if (skip && skip(r, c)) continue;
    const double keep = x(r, c);
    x(r, c) = keep + h;
    const double fp = f(x);
    x(r, c) = keep - h;
    const double fm = f(x);
    x(r, c) = keep;
    const double num = (fp - fm) / (2.0 * h);
    const double err = std::abs(num - grad(r, c));
    rep.max_abs_err = std::max(rep.max_abs_err, err);
    rep.max_rel_err =
        std::max(rep.max_rel_err, err / std::max({std::abs(num), std::abs(grad(r, c)), floor}));
    ++rep.checked;
  }
  return rep;
}

}  // namespace nfsr::testing
