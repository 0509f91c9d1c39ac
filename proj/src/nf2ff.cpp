#include "nfsr/nf2ff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "nfsr/error.hpp"
#include "nfsr/fft.hpp"

namespace nfsr {

using std::numbers::pi;

namespace {

// Padded, shifted and phase-referenced spectrum of one component.
ComplexMap spectrum_component(const ComplexMap& field, const GridSpec& grid,
                              std::span<const double> kx, std::span<const double> ky) {
  const std::size_t nkx = kx.size();
  const std::size_t nky = ky.size();
  ComplexMap work(nky, nkx);
  for (std::size_t j = 0; j < field.rows(); ++j)
    for (std::size_t i = 0; i < field.cols(); ++i) work(j, i) = field(j, i);
  // exp(+j ...) kernel is FFTW's backward direction.
  fft::dft2d(work, fft::Sign::Backward);

  const double x0 = grid.x(0);
  const double y0 = grid.y(0);
  const double cell = grid.dx * grid.dy;
  const long hx = static_cast<long>(nkx / 2);
  const long hy = static_cast<long>(nky / 2);
  ComplexMap out(nky, nkx);
  for (std::size_t b = 0; b < nky; ++b) {
    // Output row b holds wavenumber index m = b - hy, stored at DFT bin m mod N.
    const long my = static_cast<long>(b) - hy;
    const std::size_t src_b = static_cast<std::size_t>((my + static_cast<long>(nky)) % static_cast<long>(nky));
    for (std::size_t a = 0; a < nkx; ++a) {
      const long mx = static_cast<long>(a) - hx;
      const std::size_t src_a = static_cast<std::size_t>((mx + static_cast<long>(nkx)) % static_cast<long>(nkx));
      const cd ref = std::exp(cd(0.0, kx[a] * x0 + ky[b] * y0));
      out(b, a) = cell * ref * work(src_b, src_a);
    }
  }
  return out;
}

std::vector<double> wavenumber_axis(std::size_t n, double spacing) {
  std::vector<double> axis(n);
  const long h = static_cast<long>(n / 2);
  const double dk = 2.0 * pi / (static_cast<double>(n) * spacing);
  for (std::size_t a = 0; a < n; ++a) axis[a] = static_cast<double>(static_cast<long>(a) - h) * dk;
  return axis;
}

cd interp_periodic(const ComplexMap& f, std::span<const double> kx_axis,
                   std::span<const double> ky_axis, double kx, double ky) {
  const std::size_t nx = kx_axis.size();
  const std::size_t ny = ky_axis.size();
  const double dkx = kx_axis[1] - kx_axis[0];
  const double dky = ky_axis[1] - ky_axis[0];
  const double ux = (kx - kx_axis[0]) / dkx;
  const double uy = (ky - ky_axis[0]) / dky;
  const double fx0 = std::floor(ux);
  const double fy0 = std::floor(uy);
  const double tx = ux - fx0;
  const double ty = uy - fy0;
  auto wrap = [](long i, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
  };
  const std::size_t i0 = wrap(static_cast<long>(fx0), nx), i1 = wrap(static_cast<long>(fx0) + 1, nx);
  const std::size_t j0 = wrap(static_cast<long>(fy0), ny), j1 = wrap(static_cast<long>(fy0) + 1, ny);
  return (1.0 - ty) * ((1.0 - tx) * f(j0, i0) + tx * f(j0, i1)) +
         ty * ((1.0 - tx) * f(j1, i0) + tx * f(j1, i1));
}

std::size_t nearest_phi(std::span<const double> phi_axis, double target) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < phi_axis.size(); ++i) {
    double d = std::fmod(std::abs(phi_axis[i] - target), 2.0 * pi);
    d = std::min(d, 2.0 * pi - d);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  double step = 2.0 * pi;
  for (std::size_t i = 1; i < phi_axis.size(); ++i)
    step = std::min(step, std::abs(phi_axis[i] - phi_axis[i - 1]));
  if (best_d > step * (1.0 + 1e-9) + 1e-12 && best_d > 1e-12)
    throw ConfigError("pattern phi axis lacks the requested principal plane");
  return best;
}

}  // namespace

PlaneWaveSpectrum plane_wave_spectrum(const FieldMap& map, int pad_factor) {
  map.validate();
  if (pad_factor < 1 || pad_factor > 16) throw ConfigError("pad_factor must be in [1, 16]");
  if (!map.grid.fully_sampled())
    throw ConfigError("Nyquist violation: grid spacing exceeds lambda/2; super-resolve first");

  const std::size_t nkx = static_cast<std::size_t>(map.grid.nx) * pad_factor;
  const std::size_t nky = static_cast<std::size_t>(map.grid.ny) * pad_factor;
  PlaneWaveSpectrum spec;
  spec.k0 = map.grid.wavenumber();
  spec.kx_axis = wavenumber_axis(nkx, map.grid.dx);
  spec.ky_axis = wavenumber_axis(nky, map.grid.dy);
  spec.fx = spectrum_component(map.ex, map.grid, spec.kx_axis, spec.ky_axis);
  spec.fy = spectrum_component(map.ey, map.grid, spec.kx_axis, spec.ky_axis);
  return spec;
}

FarFieldPattern to_farfield(const PlaneWaveSpectrum& spec, std::span<const double> theta_axis,
                            std::span<const double> phi_axis) {
  if (spec.kx_axis.size() < 2 || spec.ky_axis.size() < 2)
    throw ConfigError("plane-wave spectrum is too small to interpolate");
  for (double th : theta_axis)
    if (!(th >= 0.0 && th <= 0.5 * pi + 1e-12))
      throw DomainError("theta outside [0, pi/2]: planar scans cover the forward hemisphere only");

  FarFieldPattern ff;
  ff.theta_axis.assign(theta_axis.begin(), theta_axis.end());
  ff.phi_axis.assign(phi_axis.begin(), phi_axis.end());
  ff.e_theta = ComplexMap(theta_axis.size(), phi_axis.size());
  ff.e_phi = ComplexMap(theta_axis.size(), phi_axis.size());
  for (std::size_t t = 0; t < theta_axis.size(); ++t) {
    const double th = std::min(theta_axis[t], 0.5 * pi);
    for (std::size_t p = 0; p < phi_axis.size(); ++p) {
      const double ph = phi_axis[p];
      const double kx = spec.k0 * std::sin(th) * std::cos(ph);
      const double ky = spec.k0 * std::sin(th) * std::sin(ph);
      const cd fx = interp_periodic(spec.fx, spec.kx_axis, spec.ky_axis, kx, ky);
      const cd fy = interp_periodic(spec.fy, spec.kx_axis, spec.ky_axis, kx, ky);
      ff.e_theta(t, p) = fx * std::cos(ph) + fy * std::sin(ph);
      ff.e_phi(t, p) = std::cos(th) * (-fx * std::sin(ph) + fy * std::cos(ph));
    }
  }
  return ff;
}

PatternCut extract_cut(const FarFieldPattern& pattern, CutPlane plane, char polarization_axis) {
  if (polarization_axis != 'x' && polarization_axis != 'y')
    throw ConfigError("polarization axis must be 'x' or 'y'");
  const bool phi_zero = (plane == CutPlane::E) == (polarization_axis == 'x');
  const double phi_cut = phi_zero ? 0.0 : 0.5 * pi;
  const std::size_t pos = nearest_phi(pattern.phi_axis, phi_cut);
  const std::size_t neg = nearest_phi(pattern.phi_axis, phi_cut + pi);
  const ComplexMap& comp = plane == CutPlane::E ? pattern.e_theta : pattern.e_phi;

  // Sort theta so the mirrored axis is monotone.
  std::vector<std::size_t> order(pattern.theta_axis.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return pattern.theta_axis[a] < pattern.theta_axis[b]; });

  PatternCut cut;
  cut.plane = plane;
  std::vector<double> mag;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (pattern.theta_axis[*it] <= 0.0) continue;  // theta = 0 is taken from the positive side
    cut.angle_deg.push_back(-pattern.theta_axis[*it] * 180.0 / pi);
    mag.push_back(std::abs(comp(*it, neg)));
  }
  for (std::size_t idx : order) {
    cut.angle_deg.push_back(pattern.theta_axis[idx] * 180.0 / pi);
    mag.push_back(std::abs(comp(idx, pos)));
  }
  const double peak = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
  if (!(peak > 0.0)) throw NumericError("degenerate pattern");
  cut.level_db.reserve(mag.size());
  for (double m : mag) {
    const double db = m > 0.0 ? 20.0 * std::log10(m / peak) : kPatternFloorDb;
    cut.level_db.push_back(std::max(db, kPatternFloorDb));
  }
  return cut;
}

double pattern_error(const PatternCut& a, const PatternCut& b, double floor_db) {
  if (a.angle_deg.size() != b.angle_deg.size() || a.level_db.size() != b.level_db.size() ||
      a.level_db.size() != a.angle_deg.size())
    throw ConfigError("pattern cuts have mismatched angle axes");
  for (std::size_t i = 0; i < a.angle_deg.size(); ++i)
    if (std::abs(a.angle_deg[i] - b.angle_deg[i]) > 1e-9)
      throw ConfigError("pattern cuts have mismatched angle axes");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.level_db.size(); ++i) {
    if (std::max(a.level_db[i], b.level_db[i]) < floor_db) continue;
    sum += std::abs(a.level_db[i] - b.level_db[i]);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<double> default_theta_axis(double step_deg) {
  std::vector<double> axis;
  const int n = static_cast<int>(std::round(90.0 / step_deg));
  for (int i = 0; i <= n; ++i) axis.push_back(std::min(i * step_deg, 90.0) * pi / 180.0);
  return axis;
}

std::vector<double> principal_phi_axis() { return {0.0, 0.5 * pi, pi, 1.5 * pi}; }

void write_cut_csv(const PatternCut& cut, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "angle_deg,level_db\n" << std::setprecision(10);
  for (std::size_t i = 0; i < cut.angle_deg.size(); ++i)
    out << cut.angle_deg[i] << ',' << cut.level_db[i] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

PatternCut read_cut_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("angle_deg,level_db", 0) != 0)
    throw IoError(path.string() + ": missing 'angle_deg,level_db' header");
  PatternCut cut;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double a = 0.0, l = 0.0;
    char comma = 0;
    if (!(row >> a >> comma >> l) || comma != ',')
      throw IoError(path.string() + ": malformed row '" + line + "'");
    cut.angle_deg.push_back(a);
    cut.level_db.push_back(l);
  }
  return cut;
}

}  // namespace nfsr
