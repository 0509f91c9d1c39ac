#pragma once

// Planar near-field to far-field transform via the plane-wave spectrum.
//
//   f(kx, ky) = dx dy * sum_{i,j} E(x_i, y_j) exp(+j (kx x_i + ky y_j))
//   E_theta ~ fx cos(phi) + fy sin(phi)
//   E_phi   ~ cos(theta) (-fx sin(phi) + fy cos(phi))
//
// The radial factor j k exp(-jkr) / (2 pi r) is dropped: every consumer
// peak-normalizes the pattern.

#include <filesystem>
#include <span>
#include <vector>

#include "nfsr/fieldsynth.hpp"

namespace nfsr {

struct PlaneWaveSpectrum {
  ComplexMap fx;  // [ky][kx]
  ComplexMap fy;
  std::vector<double> kx_axis;  // rad/m, increasing, spans [-pi/dx, pi/dx)
  std::vector<double> ky_axis;
  double k0 = 0.0;
};

enum class CutPlane { E, H };

struct PatternCut {
  std::vector<double> angle_deg;  // [-90, 90]
  std::vector<double> level_db;   // peak-normalized, floored at kPatternFloorDb
  CutPlane plane = CutPlane::E;
};

inline constexpr double kPatternFloorDb = -80.0;
inline constexpr int kDefaultPadFactor = 4;

// Zero-padded DFT of the tangential fields. Throws ConfigError("Nyquist
// violation") on undersampled grids and for pad_factor outside [1, 16].
PlaneWaveSpectrum plane_wave_spectrum(const FieldMap& map, int pad_factor = kDefaultPadFactor);

// Far field on the (theta, phi) lattice, bilinear interpolation of the spectrum
// (periodic in kx, ky). theta outside [0, pi/2] is a DomainError.
FarFieldPattern to_farfield(const PlaneWaveSpectrum& spec, std::span<const double> theta_axis,
                            std::span<const double> phi_axis);

// Principal-plane cut in dB. For x polarization the E-plane is phi = 0 and the
// H-plane phi = 90 deg (swapped for y). E-plane cuts read E_theta, H-plane cuts
// E_phi. Negative angles come from the opposite half-plane (phi + 180 deg).
PatternCut extract_cut(const FarFieldPattern& pattern, CutPlane plane, char polarization_axis);

// Mean |a - b| in dB over samples where max(a, b) >= floor_db.
double pattern_error(const PatternCut& a, const PatternCut& b, double floor_db = -30.0);

// Theta 0..90 deg (inclusive) in `step_deg` steps and the four principal phi values.
std::vector<double> default_theta_axis(double step_deg = 1.0);
std::vector<double> principal_phi_axis();

// CSV with header `angle_deg,level_db`.
void write_cut_csv(const PatternCut& cut, const std::filesystem::path& path);
PatternCut read_cut_csv(const std::filesystem::path& path);

}  // namespace nfsr
