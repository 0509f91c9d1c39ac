#pragma once

// CSV tables and SVG cut overlays for evaluation results.
//
// Numbers are printed with 9 significant digits so that reports of repeated
// runs compare byte for byte.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfsr/eval.hpp"

namespace nfsr {

// scene,method,factor,status,mag_mae,phase_lpp,mag_msssim,phase_msssim,
// e_plane_db,h_plane_db,pattern_error_db,pattern_error_alt_floor_db
void write_comparison_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path);

// method,factor,scenes,failed,<averaged metrics>,within_3db_of_identity,below_identity
void write_summary_csv(const std::vector<MethodSummary>& rows, const std::filesystem::path& path);

// scene,status,gm_gp_db,gm_rp_db,rm_gp_db,rm_rp_db
void write_attribution_csv(const std::vector<AttributionRow>& rows,
                           const std::filesystem::path& path);

// snr_db,scenes,mean_error_db,mean_identity_db
void write_snr_csv(const std::vector<SnrRow>& rows, const std::filesystem::path& path);

struct CutSeries {
  std::string label;
  PatternCut cut;
};

inline constexpr double kPlotFloorDb = -60.0;

// Line plot of level (dB) against angle; levels below `y_min_db` are drawn at
// `y_min_db`. The first series is drawn solid, the others dashed.
std::string overlay_svg(const std::string& title, const std::vector<CutSeries>& series,
                        double y_min_db = kPlotFloorDb);
void write_overlay_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<CutSeries>& series, double y_min_db = kPlotFloorDb);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);

// Fixed-format number used by every table.
std::string format_number(double v);

}  // namespace nfsr
