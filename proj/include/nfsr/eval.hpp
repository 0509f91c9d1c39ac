#pragma once

// Evaluation pipelines: restore undersampled maps with one method, recombine
// complex fields, transform to the far field and compare principal-plane cuts
// against the analytic pattern of the same scene.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nfsr/baselines.hpp"
#include "nfsr/dataio.hpp"
#include "nfsr/nf2ff.hpp"
#include "nfsr/unet.hpp"

namespace nfsr {

enum class Method { Identity, NfsNet, Bicubic, Kriging, Cs };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct NetPair {
  UNet<float> magnitude;
  UNet<float> phase;
};

struct RestoreContext {
  const NetPair* nets = nullptr;  // required by Method::NfsNet
  KrigingOptions kriging;
  CsConfig cs;
};

// Upsamples one normalized map to target x target. Identity has no low-res
// input to work from and is rejected; NfsNet without networks is a ConfigError.
ChannelMap restore_map(Method method, const ChannelMap& low, std::size_t target,
                       const RestoreContext& ctx);

// The four normalized channels of a field map, indexed by FieldComponent.
struct FieldChannels {
  std::array<ChannelMap, 2> magnitude;
  std::array<ChannelMap, 2> phase;

  const ChannelMap& get(FieldComponent c, ChannelKind k) const;
  ChannelMap& get(FieldComponent c, ChannelKind k);
};

FieldChannels split_channels(const FieldMap& map);
FieldMap recombine(const GridSpec& grid, const FieldChannels& channels);

struct PipelineOptions {
  int factor = 3;
  int pad_factor = kDefaultPadFactor;
  double floor_db = -30.0;
  double alt_floor_db = -40.0;  // second floor, reported alongside
  double theta_step_deg = 1.0;
  std::optional<double> snr_db;  // noise injected before normalization
  std::uint64_t noise_seed = 0;
};

// Map metrics in the normalized domain, averaged over ex and ey.
struct MapMetrics {
  double mag_mae = 0.0;
  double phase_lpp = 0.0;
  double mag_msssim = 1.0;
  double phase_msssim = 1.0;
};

struct CutPair {
  PatternCut e;
  PatternCut h;
};

struct PatternErrors {
  double e = 0.0;
  double h = 0.0;
  double mean = 0.0;      // (e + h) / 2 at floor_db
  double alt_mean = 0.0;  // same at alt_floor_db
};

struct PipelineResult {
  FieldChannels restored;
  MapMetrics metrics;
  CutPair reference;  // analytic far field
  CutPair cuts;       // transformed restored map
  PatternErrors errors;
};

// Principal-plane cuts of the transformed map and of the analytic pattern.
CutPair transformed_cuts(const FieldMap& map, char polarization, const PipelineOptions& opt);
CutPair analytic_cuts(const AntennaScene& scene, char polarization, const PipelineOptions& opt);
PatternErrors compare_cuts(const CutPair& reference, const CutPair& cuts, const PipelineOptions& opt);

// synthesize -> [noise] -> normalize -> downsample -> restore -> denormalize ->
// recombine -> NF2FF -> cuts -> pattern error against the analytic pattern.
// Method::Identity skips downsampling and restoration.
PipelineResult end_to_end(const AntennaScene& scene, const GridSpec& grid, Method method,
                          const PipelineOptions& opt, const RestoreContext& ctx);

// Ground-truth (G) and network-restored (R) magnitude (M) and phase (P).
struct Attribution {
  double gm_gp = 0.0;
  double gm_rp = 0.0;
  double rm_gp = 0.0;
  double rm_rp = 0.0;
};

Attribution error_attribution(const AntennaScene& scene, const GridSpec& grid,
                              const PipelineOptions& opt, const RestoreContext& ctx);

struct SnrPoint {
  double snr_db = 0.0;
  double error = 0.0;
};

// Noise seed for each level is derived from `seed` and the level itself, so a
// level gets the same noise regardless of the other entries in the list.
std::vector<SnrPoint> snr_sweep(const AntennaScene& scene, const GridSpec& grid, Method method,
                                const std::vector<double>& snr_list, std::uint64_t seed,
                                const PipelineOptions& opt, const RestoreContext& ctx);

// ---- studies over the held-out scenes of a dataset ----

struct EvalScene {
  int id = 0;
  AntennaScene scene;
  GridSpec grid;
};

// Test-split scenes of a dataset manifest.
std::vector<EvalScene> held_out_scenes(const DatasetManifest& manifest);

struct EvalRow {
  int scene = 0;
  Method method = Method::Identity;
  int factor = 0;
  bool ok = true;
  std::string status;  // "ok" or the failure message
  MapMetrics metrics;
  PatternErrors errors;
  std::optional<CutPair> reference;  // kept when StudyOptions::keep_cuts
  std::optional<CutPair> cuts;
};

struct AttributionRow {
  int scene = 0;
  bool ok = true;
  std::string status;
  Attribution values;
  double identity = 0.0;
};

struct SnrRow {
  double snr_db = 0.0;
  int scenes = 0;
  double mean_error = 0.0;
  double mean_identity = 0.0;  // noiseless identity bound over the same scenes
};

struct StudyOptions {
  PipelineOptions pipeline;
  RestoreContext restore;             // nets is ignored; see nets_by_factor
  std::map<int, NetPair> nets_by_factor;
  std::vector<Method> methods{Method::Identity, Method::NfsNet, Method::Bicubic,
                              Method::Kriging, Method::Cs};
  std::vector<int> factors{3};
  std::vector<double> snr_list{10, 15, 20, 25, 30, 40};
  Method snr_method = Method::NfsNet;
  std::uint64_t seed = 0;
  int threads = 1;
  bool keep_cuts = false;
};

// Per-scene method comparison over every (scene, method, factor) cell. A cell
// that throws is kept with ok = false. NfsNet cells need a network pair for
// that factor.
std::vector<EvalRow> run_comparison(const std::vector<EvalScene>& scenes, const StudyOptions& opt);
std::vector<AttributionRow> run_attribution(const std::vector<EvalScene>& scenes,
                                            const StudyOptions& opt);
std::vector<SnrRow> run_snr(const std::vector<EvalScene>& scenes, const StudyOptions& opt);

struct MethodSummary {
  Method method = Method::Identity;
  int factor = 0;
  int scenes = 0;
  int failed = 0;
  MapMetrics metrics;
  PatternErrors errors;
  int within_3db_of_identity = 0;
  int below_identity = 0;  // cells beating the identity bound by more than 1e-9 dB
};

std::vector<MethodSummary> summarize(const std::vector<EvalRow>& rows);

}  // namespace nfsr
