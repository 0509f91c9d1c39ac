#pragma once

// Synthetic near-field maps and analytic far-field ground truth built from
// superpositions of infinitesimal (Hertzian) dipoles.
//
// Conventions: time dependence exp(+j*omega*t); outgoing waves carry exp(-j*k*r).
// The scan plane is z = z_d, sources sit at z < z_d, and grid coordinates are
// centred on the origin: x_i = (i - (nx-1)/2) * dx.

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfsr/array2d.hpp"

namespace nfsr {

using cd = std::complex<double>;
using ComplexMap = Array2D<cd>;

inline constexpr double kSpeedOfLight = 299792458.0;

struct GridSpec {
  int nx = 86;
  int ny = 86;
  double dx = 0.0;  // m
  double dy = 0.0;  // m
  double z_d = 0.0;  // scan-plane distance, m
  double freq_hz = 0.0;

  double wavelength() const { return kSpeedOfLight / freq_hz; }
  double wavenumber() const;
  // dx, dy <= lambda/2 (with a relative slack of 1e-9 for round-off).
  bool fully_sampled() const;
  double x(int i) const { return (2 * i - (nx - 1)) * dx * 0.5; }
  double y(int j) const { return (2 * j - (ny - 1)) * dy * 0.5; }
  // Throws ConfigError on nx,ny < 2 or non-positive spacing/distance/frequency.
  void validate() const;

  // Square grid of n x n samples at `spacing_lambda` wavelengths, scan plane at
  // `zd_lambda` wavelengths.
  static GridSpec square(int n, double freq_hz, double spacing_lambda = 0.5,
                         double zd_lambda = 4.0);
};

struct DipoleSource {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d orientation = Eigen::Vector3d::UnitX();
  cd amplitude{1.0, 0.0};

  bool operator==(const DipoleSource&) const = default;
};

struct AntennaScene {
  std::vector<DipoleSource> sources;
  double freq_hz = 0.0;

  // Non-empty, unit orientations, and every source strictly below z_d.
  void validate(double z_d) const;
  bool operator==(const AntennaScene&) const = default;
};

struct FieldMap {
  GridSpec grid;
  ComplexMap ex;  // [ny][nx]
  ComplexMap ey;  // [ny][nx]

  void validate() const;
};

struct FarFieldPattern {
  ComplexMap e_theta;  // [n_theta][n_phi]
  ComplexMap e_phi;    // [n_theta][n_phi]
  std::vector<double> theta_axis;  // rad, within [0, pi/2]
  std::vector<double> phi_axis;    // rad
};

enum class SceneProfile { Single, LinearArray, PlanarArray, RandomCluster };

std::string to_string(SceneProfile p);
SceneProfile parse_scene_profile(const std::string& s);

// Complex E-field of an infinitesimal dipole including the 1/r, 1/r^2 and 1/r^3
// terms, scaled by 1/k^2 so that the radiating term is a * p_perp * exp(-jkr) / r.
Eigen::Vector3cd hertzian_dipole_field(const DipoleSource& src, const Eigen::Vector3d& point,
                                       double freq_hz);

FieldMap synthesize_nearfield(const AntennaScene& scene, const GridSpec& grid);

// Far-field E_theta/E_phi of the dipole superposition with the common
// exp(-jkr)/r factor dropped: sum_n a_n (p_n . unit) exp(+j k rhat . r_n).
FarFieldPattern analytic_farfield(const AntennaScene& scene, std::span<const double> theta_axis,
                                  std::span<const double> phi_axis);

// Deterministic scene for (seed, profile). Geometry is expressed in wavelengths
// of `freq_hz`; see README for the sampled ranges.
AntennaScene random_scene(std::uint64_t seed, SceneProfile profile, double freq_hz = 3.0e9);

struct TruncationCheck {
  bool passes = false;
  double margin_db = 0.0;  // max in-plane level minus worst border level
};

inline constexpr double kTruncationMarginCapDb = 300.0;

// Border level of sqrt(|ex|^2 + |ey|^2) relative to the plane maximum.
TruncationCheck check_truncation(const FieldMap& map, double threshold_db = 40.0);

// x if the map carries more |ex|^2 energy than |ey|^2, else y.
char dominant_polarization(const FieldMap& map);

}  // namespace nfsr
