#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nfsr/error.hpp"
#include "nfsr/eval.hpp"
#include "nfsr/report.hpp"

using namespace nfsr;
namespace fs = std::filesystem;

namespace {

constexpr double kFreq = 3e9;

GridSpec small_grid() { return GridSpec::square(48, kFreq); }

NetPair tiny_nets() {
  UNetConfig c;
  c.base_channels = 2;
  c.stages = 1;
  c.in_size = 48;
  c.pad_to = 48;
  NetPair p{UNet<float>(c), UNet<float>(c)};
  p.magnitude.init(1);
  p.phase.init(2);
  return p;
}

// A planar array whose field has decayed by more than 40 dB at the plane edge.
AntennaScene compact_scene() { return random_scene(0, SceneProfile::PlanarArray, kFreq); }

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("method names") {
  for (auto m : {Method::Identity, Method::NfsNet, Method::Bicubic, Method::Kriging, Method::Cs})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("spline"), ConfigError);
}

TEST_CASE("restore_map dispatch and preconditions") {
  ChannelMap low;
  low.values = Array2D<float>(16, 16, 0.5f);
  const RestoreContext none;
  CHECK_THROWS_AS(restore_map(Method::Identity, low, 48, none), ConfigError);
  CHECK_THROWS_AS(restore_map(Method::NfsNet, low, 48, none), ConfigError);
  for (auto m : {Method::Bicubic, Method::Kriging, Method::Cs})
    CHECK(restore_map(m, low, 48, none).rows() == 48);
  const NetPair nets = tiny_nets();
  const RestoreContext ctx{&nets, {}, {}};
  CHECK(restore_map(Method::NfsNet, low, 48, ctx).rows() == 48);
  ChannelMap wrong;
  wrong.values = Array2D<float>(29, 29, 0.5f);
  CHECK_THROWS_AS(restore_map(Method::NfsNet, wrong, 86, ctx), ConfigError);
}

TEST_CASE("split and recombine round trip") {
  const FieldMap m = synthesize_nearfield(random_scene(4, SceneProfile::LinearArray, kFreq), small_grid());
  const FieldMap back = recombine(m.grid, split_channels(m));
  double worst = 0.0, scale = 0.0;
  for (std::size_t q = 0; q < m.ex.size(); ++q) {
    worst = std::max({worst, std::abs(back.ex.storage()[q] - m.ex.storage()[q]),
                      std::abs(back.ey.storage()[q] - m.ey.storage()[q])});
    scale = std::max({scale, std::abs(m.ex.storage()[q]), std::abs(m.ey.storage()[q])});
  }
  CHECK(worst < 1e-5 * scale);
}

TEST_CASE("end to end: identity bound, restored methods and noise") {
  const AntennaScene scene = compact_scene();
  PipelineOptions opt;
  const RestoreContext ctx;
  const PipelineResult id = end_to_end(scene, small_grid(), Method::Identity, opt, ctx);
  CHECK(id.metrics.mag_mae < 1e-6);
  CHECK(id.metrics.mag_msssim == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(id.errors.mean == doctest::Approx((id.errors.e + id.errors.h) / 2));
  CHECK(check_truncation(synthesize_nearfield(scene, small_grid())).passes);
  CHECK(id.errors.mean < 1.0);

  const PipelineResult bi = end_to_end(scene, small_grid(), Method::Bicubic, opt, ctx);
  CHECK(bi.metrics.mag_mae > 0.0);
  CHECK(bi.cuts.e.angle_deg == id.cuts.e.angle_deg);

  PipelineOptions quiet = opt;
  quiet.snr_db = 300.0;
  const PipelineResult q = end_to_end(scene, small_grid(), Method::Identity, quiet, ctx);
  CHECK(q.errors.mean == doctest::Approx(id.errors.mean).epsilon(1e-6));

  PipelineOptions bad = opt;
  bad.factor = 5;
  CHECK_THROWS_AS(end_to_end(scene, small_grid(), Method::Bicubic, bad, ctx), ConfigError);
}

TEST_CASE("error attribution and SNR sweep") {
  const AntennaScene scene = compact_scene();
  const NetPair nets = tiny_nets();
  const RestoreContext ctx{&nets, {}, {}};
  PipelineOptions opt;
  const Attribution a = error_attribution(scene, small_grid(), opt, ctx);
  const double id = end_to_end(scene, small_grid(), Method::Identity, opt, ctx).errors.mean;
  CHECK(a.gm_gp == doctest::Approx(id));

  const std::vector<double> levels{10.0, 300.0};
  const auto s1 = snr_sweep(scene, small_grid(), Method::Bicubic, levels, 9, opt, ctx);
  const auto s2 = snr_sweep(scene, small_grid(), Method::Bicubic, {300.0}, 9, opt, ctx);
  REQUIRE(s1.size() == 2);
  CHECK(s1[1].error == s2[0].error);
  CHECK(s1[0].snr_db == 10.0);
}

TEST_CASE("studies, summaries and reports") {
  DatasetConfig dc;
  dc.n_scenes = 5;
  dc.grid_n = 48;
  dc.split_ratio = 0.6;
  dc.seed = 12;
  const fs::path dir = fs::temp_directory_path() / "nfsr_test_eval";
  fs::remove_all(dir);
  const DatasetManifest manifest = build_dataset(dc, dir / "data");
  const auto scenes = held_out_scenes(manifest);
  CHECK(scenes.size() == manifest.test_scenes.size());

  StudyOptions so;
  so.methods = {Method::Identity, Method::Bicubic, Method::NfsNet};
  so.factors = {3};
  so.keep_cuts = true;
  const auto rows = run_comparison(scenes, so);
  CHECK(rows.size() == 3 * scenes.size());
  int failed = 0;
  for (const auto& r : rows) {
    if (r.method == Method::NfsNet) {
      CHECK_FALSE(r.ok);
      ++failed;
    } else {
      CHECK(r.ok);
      CHECK(r.cuts.has_value());
    }
  }
  CHECK(failed == static_cast<int>(scenes.size()));

  so.threads = 2;
  const auto again = run_comparison(scenes, so);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].errors.mean == again[i].errors.mean);

  const auto summary = summarize(rows);
  CHECK(summary.size() == 3);
  for (const auto& s : summary)
    if (s.method == Method::Identity) CHECK(s.within_3db_of_identity == s.scenes);

  write_comparison_csv(rows, dir / "compare.csv");
  const auto lines = lines_of(dir / "compare.csv");
  CHECK(lines.size() == rows.size() + 1);
  CHECK(lines[0] ==
        "scene,method,factor,status,mag_mae,phase_lpp,mag_msssim,phase_msssim,e_plane_db,h_plane_db,"
        "pattern_error_db,pattern_error_alt_floor_db");
  write_summary_csv(summary, dir / "summary.csv");
  CHECK(lines_of(dir / "summary.csv").size() == summary.size() + 1);

  so.factors = {2};
  so.methods = {Method::Bicubic};
  const auto f2 = run_comparison(scenes, so);
  for (const auto& r : f2) CHECK(r.factor == 2);

  StudyOptions snr;
  snr.snr_method = Method::Bicubic;
  snr.snr_list = {10.0, 30.0};
  const auto srows = run_snr(scenes, snr);
  CHECK(srows.size() == 2);
  write_snr_csv(srows, dir / "snr.csv");
  CHECK(lines_of(dir / "snr.csv").size() == 3);
}

TEST_CASE("svg overlay is well formed and clamps to the floor") {
  PatternCut a{{-90, 0, 90}, {-200, 0, -10}, CutPlane::E};
  PatternCut b{{-90, 0, 90}, {-5, -1, -12}, CutPlane::E};
  const std::string svg = overlay_svg("E <plane> & more", {{"ref", a}, {"net", b}});
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("E &lt;plane&gt; &amp; more") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("-200") == std::string::npos);
  std::size_t open = 0, close = 0;
  for (char ch : svg) open += ch == '<', close += ch == '>';
  CHECK(open == close);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333");
}
