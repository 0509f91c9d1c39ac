#include "nfsr/fieldsynth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nfsr/error.hpp"
#include "nfsr/rng.hpp"

namespace nfsr {

using std::numbers::pi;

double GridSpec::wavenumber() const { return 2.0 * pi * freq_hz / kSpeedOfLight; }

bool GridSpec::fully_sampled() const {
  const double half = 0.5 * wavelength() * (1.0 + 1e-9);
  return dx <= half && dy <= half;
}

void GridSpec::validate() const {
  if (nx < 2 || ny < 2) throw ConfigError("grid needs at least 2x2 samples");
  if (!(dx > 0.0) || !(dy > 0.0)) throw ConfigError("grid spacing must be positive");
  if (!(z_d > 0.0)) throw ConfigError("scan-plane distance must be positive");
  if (!(freq_hz > 0.0)) throw ConfigError("frequency must be positive");
}

GridSpec GridSpec::square(int n, double freq_hz, double spacing_lambda, double zd_lambda) {
  GridSpec g;
  g.nx = n;
  g.ny = n;
  g.freq_hz = freq_hz;
  const double lambda = g.wavelength();
  g.dx = spacing_lambda * lambda;
  g.dy = spacing_lambda * lambda;
  g.z_d = zd_lambda * lambda;
  return g;
}

void AntennaScene::validate(double z_d) const {
  if (sources.empty()) throw ConfigError("antenna scene has no sources");
  if (!(freq_hz > 0.0)) throw ConfigError("scene frequency must be positive");
  for (const auto& s : sources) {
    if (std::abs(s.orientation.norm() - 1.0) > 1e-9)
      throw ConfigError("dipole orientation must be a unit vector");
    if (!(s.position.z() < z_d)) throw ConfigError("dipole source must lie behind the scan plane");
  }
}

void FieldMap::validate() const {
  grid.validate();
  const auto ny = static_cast<std::size_t>(grid.ny);
  const auto nx = static_cast<std::size_t>(grid.nx);
  if (ex.rows() != ny || ex.cols() != nx || ey.rows() != ny || ey.cols() != nx)
    throw ConfigError("field map shape does not match its grid");
  auto finite = [](const cd& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); };
  if (!std::all_of(ex.begin(), ex.end(), finite) || !std::all_of(ey.begin(), ey.end(), finite))
    throw NumericError("field map contains non-finite samples");
}

std::string to_string(SceneProfile p) {
  switch (p) {
    case SceneProfile::Single: return "single";
    case SceneProfile::LinearArray: return "linear_array";
    case SceneProfile::PlanarArray: return "planar_array";
    case SceneProfile::RandomCluster: return "random_cluster";
  }
  return "unknown";
}

SceneProfile parse_scene_profile(const std::string& s) {
  if (s == "single") return SceneProfile::Single;
  if (s == "linear_array") return SceneProfile::LinearArray;
  if (s == "planar_array") return SceneProfile::PlanarArray;
  if (s == "random_cluster") return SceneProfile::RandomCluster;
  throw ConfigError("unknown scene profile '" + s + "'");
}

Eigen::Vector3cd hertzian_dipole_field(const DipoleSource& src, const Eigen::Vector3d& point,
                                       double freq_hz) {
  const Eigen::Vector3d rvec = point - src.position;
  const double r = rvec.norm();
  if (!(r > 0.0)) throw DomainError("singular observation point");
  const double k = 2.0 * pi * freq_hz / kSpeedOfLight;
  const Eigen::Vector3d rhat = rvec / r;
  const Eigen::Vector3d& p = src.orientation;
  const double rp = rhat.dot(p);

  const Eigen::Vector3d radiating = (p - rp * rhat) / r;
  const Eigen::Vector3d reactive_dir = 3.0 * rp * rhat - p;
  const cd reactive_coef = cd(1.0 / (k * k * r * r * r), 1.0 / (k * r * r));
  const cd phase = src.amplitude * std::exp(cd(0.0, -k * r));

  Eigen::Vector3cd e;
  for (int a = 0; a < 3; ++a) e[a] = phase * (radiating[a] + reactive_coef * reactive_dir[a]);
  return e;
}

FieldMap synthesize_nearfield(const AntennaScene& scene, const GridSpec& grid) {
  grid.validate();
  scene.validate(grid.z_d);
  if (std::abs(scene.freq_hz - grid.freq_hz) > 1e-9 * grid.freq_hz)
    throw ConfigError("scene frequency does not match grid frequency");

  FieldMap map;
  map.grid = grid;
  map.ex = ComplexMap(grid.ny, grid.nx);
  map.ey = ComplexMap(grid.ny, grid.nx);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Eigen::Vector3d pt(grid.x(i), grid.y(j), grid.z_d);
      cd sx{}, sy{};
      for (const auto& src : scene.sources) {
        const Eigen::Vector3cd e = hertzian_dipole_field(src, pt, grid.freq_hz);
        sx += e.x();
        sy += e.y();
      }
      map.ex(j, i) = sx;
      map.ey(j, i) = sy;
    }
  }
  return map;
}

FarFieldPattern analytic_farfield(const AntennaScene& scene, std::span<const double> theta_axis,
                                  std::span<const double> phi_axis) {
  if (scene.sources.empty()) throw ConfigError("antenna scene has no sources");
  const double k = 2.0 * pi * scene.freq_hz / kSpeedOfLight;
  FarFieldPattern ff;
  ff.theta_axis.assign(theta_axis.begin(), theta_axis.end());
  ff.phi_axis.assign(phi_axis.begin(), phi_axis.end());
  ff.e_theta = ComplexMap(theta_axis.size(), phi_axis.size());
  ff.e_phi = ComplexMap(theta_axis.size(), phi_axis.size());
  for (std::size_t t = 0; t < theta_axis.size(); ++t) {
    const double th = theta_axis[t];
    for (std::size_t f = 0; f < phi_axis.size(); ++f) {
      const double ph = phi_axis[f];
      const Eigen::Vector3d rhat(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                                 std::cos(th));
      const Eigen::Vector3d theta_hat(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph),
                                      -std::sin(th));
      const Eigen::Vector3d phi_hat(-std::sin(ph), std::cos(ph), 0.0);
      cd et{}, ep{};
      for (const auto& s : scene.sources) {
        const cd w = s.amplitude * std::exp(cd(0.0, k * rhat.dot(s.position)));
        et += w * s.orientation.dot(theta_hat);
        ep += w * s.orientation.dot(phi_hat);
      }
      ff.e_theta(t, f) = et;
      ff.e_phi(t, f) = ep;
    }
  }
  return ff;
}

namespace {

Eigen::Vector3d tangential_orientation(Rng& rng, double max_tilt_rad) {
  const double psi = rng.uniform(0.0, pi);
  const double tilt = rng.uniform(-max_tilt_rad, max_tilt_rad);
  return Eigen::Vector3d(std::cos(psi) * std::cos(tilt), std::sin(psi) * std::cos(tilt),
                         std::sin(tilt))
      .normalized();
}

// Amplitude taper across n elements: blend between uniform and raised cosine.
std::vector<double> taper(Rng& rng, int n, double min_blend, double max_power) {
  const double blend = rng.uniform(min_blend, 1.0);
  const double power = rng.uniform(1.0, max_power);
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    const double u = n == 1 ? 0.0 : (2.0 * i / (n - 1) - 1.0);
    const double cosine = std::pow(std::cos(0.5 * pi * u * 0.9), power);
    w[i] = (1.0 - blend) + blend * cosine;
  }
  return w;
}

}  // namespace

AntennaScene random_scene(std::uint64_t seed, SceneProfile profile, double freq_hz) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(profile)));
  const double lambda = kSpeedOfLight / freq_hz;
  const double k = 2.0 * pi / lambda;
  AntennaScene scene;
  scene.freq_hz = freq_hz;

  switch (profile) {
    case SceneProfile::Single: {
      DipoleSource s;
      s.position = Eigen::Vector3d(rng.uniform(-0.5, 0.5) * lambda,
                                   rng.uniform(-0.5, 0.5) * lambda,
                                   rng.uniform(-0.25, 0.0) * lambda);
      s.orientation = tangential_orientation(rng, pi / 6.0);
      s.amplitude = std::polar(1.0, rng.uniform(-pi, pi));
      scene.sources.push_back(s);
      break;
    }
    case SceneProfile::LinearArray:
    case SceneProfile::PlanarArray: {
      const bool planar = profile == SceneProfile::PlanarArray;
      // Planar arrays are the directive population: larger apertures, stronger
      // tapers and tighter spacing than the linear ones.
      const int nx = planar ? rng.uniform_int(4, 10) : rng.uniform_int(2, 8);
      const int ny = planar ? rng.uniform_int(4, 10) : 1;
      const double smax = planar ? 0.65 : 0.8;
      const double sx = rng.uniform(0.45, smax) * lambda;
      const double sy = rng.uniform(0.45, smax) * lambda;
      const bool along_y = !planar && rng.uniform() < 0.5;
      const Eigen::Vector3d orient =
          rng.uniform() < 0.5 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
      const double max_steer = planar ? pi / 12.0 : pi / 6.0;
      const double steer_x = rng.uniform(-max_steer, max_steer);
      const double steer_y = planar ? rng.uniform(-max_steer, max_steer) : 0.0;
      const double min_blend = planar ? 0.6 : 0.0;
      const double max_power = planar ? 3.0 : 2.0;
      const auto wx = taper(rng, nx, min_blend, max_power);
      const auto wy = taper(rng, ny, min_blend, max_power);
      const double base_phase = rng.uniform(-pi, pi);
      for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
          double px = (ix - 0.5 * (nx - 1)) * sx;
          double py = (iy - 0.5 * (ny - 1)) * sy;
          if (along_y) std::swap(px, py);
          DipoleSource s;
          s.position = Eigen::Vector3d(px, py, 0.0);
          s.orientation = orient;
          // Progressive phase steers the beam towards (steer_x, steer_y) off broadside.
          const double ph = base_phase - k * (px * std::sin(steer_x) + py * std::sin(steer_y));
          s.amplitude = std::polar(wx[ix] * wy[iy], ph);
          scene.sources.push_back(s);
        }
      }
      break;
    }
    case SceneProfile::RandomCluster: {
      const int n = rng.uniform_int(2, 6);
      for (int i = 0; i < n; ++i) {
        DipoleSource s;
        s.position = Eigen::Vector3d(rng.uniform(-1.0, 1.0) * lambda,
                                     rng.uniform(-1.0, 1.0) * lambda,
                                     rng.uniform(-0.5, 0.0) * lambda);
        s.orientation = tangential_orientation(rng, pi / 4.0);
        s.amplitude = std::polar(rng.uniform(0.3, 1.0), rng.uniform(-pi, pi));
        scene.sources.push_back(s);
      }
      break;
    }
  }
  return scene;
}

TruncationCheck check_truncation(const FieldMap& map, double threshold_db) {
  map.validate();
  const std::size_t ny = map.ex.rows();
  const std::size_t nx = map.ex.cols();
  double peak = 0.0;
  double border = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double m = std::sqrt(std::norm(map.ex(j, i)) + std::norm(map.ey(j, i)));
      peak = std::max(peak, m);
      if (j == 0 || i == 0 || j + 1 == ny || i + 1 == nx) border = std::max(border, m);
    }
  }
  if (!(peak > 0.0)) throw NumericError("degenerate field map");
  TruncationCheck out;
  out.margin_db = border > 0.0
                      ? std::min(20.0 * std::log10(peak / border), kTruncationMarginCapDb)
                      : kTruncationMarginCapDb;
  out.passes = out.margin_db >= threshold_db;
  return out;
}

char dominant_polarization(const FieldMap& map) {
  double px = 0.0, py = 0.0;
  for (const auto& v : map.ex) px += std::norm(v);
  for (const auto& v : map.ey) py += std::norm(v);
  return px >= py ? 'x' : 'y';
}

}  // namespace nfsr
