#include "nfsr/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nfsr/error.hpp"

namespace nfsr {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

// Quotes a CSV field if it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + '"';
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_comparison_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "scene,method,factor,status,mag_mae,phase_lpp,mag_msssim,phase_msssim,"
         "e_plane_db,h_plane_db,pattern_error_db,pattern_error_alt_floor_db\n";
  for (const EvalRow& r : rows) {
    out << r.scene << ',' << to_string(r.method) << ',' << r.factor << ',' << csv_field(r.status);
    if (r.ok) {
      for (double v : {r.metrics.mag_mae, r.metrics.phase_lpp, r.metrics.mag_msssim,
                       r.metrics.phase_msssim, r.errors.e, r.errors.h, r.errors.mean,
                       r.errors.alt_mean})
        out << ',' << format_number(v);
    } else {
      out << ",,,,,,,,";
    }
    out << '\n';
  }
  close_out(out, path);
}

void write_summary_csv(const std::vector<MethodSummary>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "method,factor,scenes,failed,mag_mae,phase_lpp,mag_msssim,phase_msssim,"
         "e_plane_db,h_plane_db,pattern_error_db,pattern_error_alt_floor_db,"
         "within_3db_of_identity,below_identity\n";
  for (const MethodSummary& s : rows) {
    out << to_string(s.method) << ',' << s.factor << ',' << s.scenes << ',' << s.failed;
    for (double v : {s.metrics.mag_mae, s.metrics.phase_lpp, s.metrics.mag_msssim,
                     s.metrics.phase_msssim, s.errors.e, s.errors.h, s.errors.mean,
                     s.errors.alt_mean})
      out << ',' << format_number(v);
    out << ',' << s.within_3db_of_identity << ',' << s.below_identity << '\n';
  }
  close_out(out, path);
}

void write_attribution_csv(const std::vector<AttributionRow>& rows,
                           const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "scene,status,gm_gp_db,gm_rp_db,rm_gp_db,rm_rp_db\n";
  for (const AttributionRow& r : rows) {
    out << r.scene << ',' << csv_field(r.status);
    if (r.ok) {
      for (double v : {r.values.gm_gp, r.values.gm_rp, r.values.rm_gp, r.values.rm_rp})
        out << ',' << format_number(v);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
  close_out(out, path);
}

void write_snr_csv(const std::vector<SnrRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "snr_db,scenes,mean_error_db,mean_identity_db\n";
  for (const SnrRow& r : rows)
    out << format_number(r.snr_db) << ',' << r.scenes << ',' << format_number(r.mean_error) << ','
        << format_number(r.mean_identity) << '\n';
  close_out(out, path);
}

std::string overlay_svg(const std::string& title, const std::vector<CutSeries>& series,
                        double y_min_db) {
  if (series.empty()) throw ConfigError("overlay plot needs at least one cut");
  if (!(y_min_db < 0.0)) throw ConfigError("plot floor must be negative");
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;

  double a_min = 1e300, a_max = -1e300;
  for (const auto& s : series)
    for (double a : s.cut.angle_deg) {
      a_min = std::min(a_min, a);
      a_max = std::max(a_max, a);
    }
  if (!(a_max > a_min)) {
    a_min = -90.0;
    a_max = 90.0;
  }
  auto px = [&](double a) { return L + (a - a_min) / (a_max - a_min) * pw; };
  auto py = [&](double db) { return T + (0.0 - std::clamp(db, y_min_db, 0.0)) / -y_min_db * ph; };

  static const char* colors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << xml_escape(title) << "</text>\n";

  // Grid every 10 dB and every 30 degrees.
  for (double db = 0.0; db >= y_min_db - 1e-9; db -= 10.0) {
    svg << "<line x1=\"" << L << "\" y1=\"" << py(db) << "\" x2=\"" << L + pw << "\" y2=\""
        << py(db) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << L - 6 << "\" y=\"" << py(db) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << db
        << "</text>\n";
  }
  for (double a = std::ceil(a_min / 30.0) * 30.0; a <= a_max + 1e-9; a += 30.0) {
    svg << "<line x1=\"" << px(a) << "\" y1=\"" << T << "\" x2=\"" << px(a) << "\" y2=\"" << T + ph
        << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << px(a) << "\" y=\"" << T + ph + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << a
        << "</text>\n";
  }
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">angle (deg)</text>\n"
      << "<text x=\"16\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 16 " << T + ph / 2 << ")\">level (dB)</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& c = series[k].cut;
    const char* color = colors[k % std::size(colors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (k == 0 ? "" : " stroke-dasharray=\"6 3\"") << " points=\"";
    for (std::size_t i = 0; i < c.angle_deg.size(); ++i)
      svg << (i ? " " : "") << px(c.angle_deg[i]) << ',' << py(c.level_db[i]);
    svg << "\"/>\n";
    const double ly = T + 14 + 16.0 * static_cast<double>(k);
    svg << "<line x1=\"" << L + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << L + pw - 125
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (k == 0 ? "" : " stroke-dasharray=\"6 3\"") << "/>\n"
        << "<text x=\"" << L + pw - 120 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series[k].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_overlay_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<CutSeries>& series, double y_min_db) {
  const std::string text = overlay_svg(title, series, y_min_db);
  auto out = open_out(path);
  out << text;
  close_out(out, path);
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  close_out(out, path);
}

}  // namespace nfsr
