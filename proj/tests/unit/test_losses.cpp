#include <cmath>

#include "../common/fd.hpp"
#include "doctest.h"
#include "nfsr/error.hpp"
#include "nfsr/losses.hpp"

using namespace nfsr;
using nfsr::testing::check_gradient;
using nfsr::testing::random_map;
using nfsr::testing::smooth_map;

namespace {

Array2D<double> filled(std::size_t n, double v) { return Array2D<double>(n, n, v); }

}  // namespace

TEST_CASE("mae: examples and gradient") {
  CHECK(mae(filled(8, 0.3), filled(8, 0.3)).value == 0.0);
  CHECK(mae(filled(8, 0.5), filled(8, 0.25)).value == doctest::Approx(0.25));
  CHECK_THROWS_AS(mae(filled(8, 0.5), filled(7, 0.5)), ConfigError);

  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    const auto y = random_map(rng, 16), p = random_map(rng, 16);
    const auto g = mae(y, p).grad;
    const auto rep = check_gradient([&](const Array2D<double>& x) { return mae(y, x).value; }, p, g,
                                    rng, 64, 1e-6, 1e-8, [&](std::size_t r, std::size_t c) {
                                      return std::abs(y(r, c) - p(r, c)) < 1e-4;
                                    });
    CHECK(rep.max_abs_err < 1e-5);
  }
}

TEST_CASE("ssim components") {
  Rng rng(2);
  const auto y = smooth_map(rng, 32);
  const auto same = ssim_components(y, y);
  CHECK(same.l == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(same.c == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(same.s == doctest::Approx(1.0).epsilon(1e-9));

  Array2D<double> shifted = y;
  for (auto& v : shifted) v += 0.05;
  const auto sh = ssim_components(y, shifted);
  CHECK(sh.c == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sh.s == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sh.l < 1.0);

  Array2D<double> inverted = y;
  for (auto& v : inverted) v = 1.0 - v;
  CHECK(ssim_components(y, inverted).s < 0.0);

  CHECK_THROWS_AS(ssim_components(filled(8, 0.5), filled(8, 0.5)), ConfigError);
}

TEST_CASE("ms-ssim: identity, single scale and size limits") {
  Rng rng(3);
  const auto y = smooth_map(rng, 48), p = smooth_map(rng, 48);
  CHECK(ms_ssim(y, y).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ms_ssim_loss(y, y).value == doctest::Approx(0.0).epsilon(1e-12));

  MsSsimConfig one;
  one.scales = 1;
  one.scale_weights = {1.0};
  // Under a constant shift c = s = 1 everywhere, so single-scale SSIM is the pooled l.
  Array2D<double> shifted = y;
  for (auto& v : shifted) v += 0.05;
  CHECK(ms_ssim(y, shifted, one).value ==
        doctest::Approx(ssim_components(y, shifted, one).l).epsilon(1e-9));
  CHECK(ms_ssim(y, p, one).value < 1.0);

  const MsSsimConfig def;
  CHECK(def.min_size() == 44);
  CHECK_THROWS_WITH_AS(ms_ssim(filled(40, 0.5), filled(40, 0.5)), doctest::Contains("scale"),
                       ConfigError);
  MsSsimConfig five;
  five.scales = 5;
  five.scale_weights.assign(5, 0.2);
  CHECK_THROWS_AS(ms_ssim(filled(86, 0.5), filled(86, 0.5), five), ConfigError);
  MsSsimConfig bad = def;
  bad.scale_weights = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("ms-ssim stays in (0, 1] on positive maps") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const double v = ms_ssim(random_map(rng, 48), random_map(rng, 48)).value;
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ms-ssim gradient matches finite differences") {
  Rng rng(5);
  for (int t = 0; t < 3; ++t) {
    const auto y = smooth_map(rng, 48), p = smooth_map(rng, 48);
    const auto g = ms_ssim(y, p).grad;
    const auto rep = check_gradient([&](const Array2D<double>& x) { return ms_ssim(y, x).value; },
                                    p, g, rng, 40);
    CHECK(rep.max_rel_err < 1e-3);
  }
}

TEST_CASE("periodic phase loss: examples and asymmetry of the printed form") {
  CHECK(periodic_phase_loss(filled(4, 0.3), filled(4, 0.3)).value == 0.0);
  CHECK(periodic_phase_loss(filled(4, 0.99), filled(4, 0.01)).value == doctest::Approx(0.02));
  CHECK(periodic_phase_loss(filled(4, 0.99), filled(4, 0.01), PhaseLossVariant::PaperLiteral).value ==
        doctest::Approx(0.02));
  CHECK(periodic_phase_loss(filled(4, 0.01), filled(4, 0.99)).value == doctest::Approx(0.02));
  CHECK(periodic_phase_loss(filled(4, 0.01), filled(4, 0.99), PhaseLossVariant::PaperLiteral).value ==
        doctest::Approx(0.98));
  CHECK(periodic_phase_loss(filled(4, 0.0), filled(4, 1.0)).value == 0.0);
  CHECK_THROWS_AS(periodic_phase_loss(filled(4, 1.2), filled(4, 0.5)), DomainError);
}

TEST_CASE("periodic phase loss is a metric on the circle") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_map(rng, 6, 0.0, 1.0), b = random_map(rng, 6, 0.0, 1.0),
               c = random_map(rng, 6, 0.0, 1.0);
    const double ab = periodic_phase_loss(a, b).value, ba = periodic_phase_loss(b, a).value;
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(periodic_phase_loss(a, c).value <= ab + periodic_phase_loss(b, c).value + 1e-12);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("periodic phase loss gradient") {
  Rng rng(7);
  for (auto variant : {PhaseLossVariant::Symmetric, PhaseLossVariant::PaperLiteral}) {
    const auto z = random_map(rng, 16, 0.01, 0.99), p = random_map(rng, 16, 0.01, 0.99);
    const auto g = periodic_phase_loss(z, p, variant).grad;
    const auto rep = check_gradient(
        [&](const Array2D<double>& x) { return periodic_phase_loss(z, x, variant).value; }, p, g, rng,
        64, 1e-6, 1e-8, [&](std::size_t r, std::size_t c) {
          const double d = std::abs(z(r, c) - p(r, c));
          return d < 1e-4 || std::abs(d - 0.5) < 1e-4 || std::abs(d - 1.0) < 1e-4;
        });
    CHECK(rep.max_abs_err < 1e-5);
  }
}

TEST_CASE("composite losses") {
  Rng rng(8);
  const auto y = smooth_map(rng, 48), p = smooth_map(rng, 48);
  CHECK(composite_mag(y, y).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(composite_phase(y, y).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(composite_mag(y, p, {1.0, 0.0, 0.6, 0.4}).value == doctest::Approx(mae(y, p).value));
  CHECK(composite_phase(y, p, {1.0, 1.0, 1.0, 0.0}).value ==
        doctest::Approx(periodic_phase_loss(y, p).value));
  CHECK(std::abs(composite_mag(y, p).value - (mae(y, p).value + 1.0 - ms_ssim(y, p).value)) < 1e-9);
  CHECK(std::abs(composite_phase(y, p).value -
                 (0.6 * periodic_phase_loss(y, p).value + 0.4 * (1.0 - ms_ssim(y, p).value))) < 1e-9);
  LossWeights neg;
  neg.alpha_mag = -1.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);

  const auto g = composite_phase(y, p).grad;
  const auto rep = check_gradient(
      [&](const Array2D<double>& x) { return composite_phase(y, x).value; }, p, g, rng, 30, 1e-5,
      1e-8, [&](std::size_t r, std::size_t c) {
        const double d = std::abs(y(r, c) - p(r, c));
        return d < 1e-3 || std::abs(d - 0.5) < 1e-3;
      });
  CHECK(rep.max_rel_err < 1e-3);
}
