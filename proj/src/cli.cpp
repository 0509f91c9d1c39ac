#include "nfsr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "nfsr/baselines.hpp"
#include "nfsr/dataio.hpp"
#include "nfsr/error.hpp"
#include "nfsr/eval.hpp"
#include "nfsr/nf2ff.hpp"
#include "nfsr/report.hpp"
#include "nfsr/trainer.hpp"

namespace nfsr::cli {

namespace fs = std::filesystem;

namespace {

struct Global {
  int threads = 1;
};

// ---------------------------------------------------------------- synth

struct SynthOpts {
  int scenes = 100;
  std::uint64_t seed = 0;
  std::string out;
  int factor = 3;
  int grid = 86;
  double spacing = 0.5;
  double zd = 4.0;
  double fmin = 1.0e9;
  double fmax = 10.0e9;
  double split = 0.8;
  std::vector<std::string> profiles{"single", "linear_array", "planar_array", "random_cluster"};
};

void add_synth(CLI::App& app, SynthOpts& o) {
  app.add_option("--scenes", o.scenes, "Number of antenna scenes");
  app.add_option("--seed", o.seed, "Master seed")->required();
  app.add_option("--out", o.out, "Output bundle directory")->required();
  app.add_option("--factor", o.factor, "Downsampling factor (2 or 3)");
  app.add_option("--grid", o.grid, "Samples per side of the scan grid");
  app.add_option("--spacing", o.spacing, "Grid spacing in wavelengths");
  app.add_option("--zd", o.zd, "Scan-plane distance in wavelengths");
  app.add_option("--fmin", o.fmin, "Lowest scene frequency (Hz)");
  app.add_option("--fmax", o.fmax, "Highest scene frequency (Hz)");
  app.add_option("--split", o.split, "Fraction of scenes in the training split");
  app.add_option("--profiles", o.profiles, "Scene profiles, used round-robin")->delimiter(',');
}

void run_synth(const SynthOpts& o, const Global& g, std::ostream& out) {
  DatasetConfig c;
  c.n_scenes = o.scenes;
  c.seed = o.seed;
  c.factor = o.factor;
  c.grid_n = o.grid;
  c.spacing_lambda = o.spacing;
  c.zd_lambda = o.zd;
  c.freq_min_hz = o.fmin;
  c.freq_max_hz = o.fmax;
  c.split_ratio = o.split;
  c.threads = g.threads;
  c.profiles.clear();
  for (const auto& p : o.profiles) c.profiles.push_back(parse_scene_profile(p));
  const DatasetManifest m = build_dataset(c, o.out);
  out << "dataset " << o.out << ": " << m.scenes.size() << " scenes (" << m.train_scenes.size()
      << " train, " << m.test_scenes.size() << " test), " << m.entries.size()
      << " map pairs, factor " << m.factor << ", grid " << m.grid_n << "x" << m.grid_n << "\n";
}

// ---------------------------------------------------------------- synth-map

struct SynthMapOpts {
  std::uint64_t seed = 0;
  std::string profile = "single";
  double freq = 3.0e9;
  int grid = 86;
  double spacing = 0.5;
  double zd = 4.0;
  std::string out;
};

void add_synth_map(CLI::App& app, SynthMapOpts& o) {
  app.add_option("--seed", o.seed, "Scene seed")->required();
  app.add_option("--profile", o.profile, "Scene profile")
      ->check(CLI::IsMember({"single", "linear_array", "planar_array", "random_cluster"}));
  app.add_option("--freq", o.freq, "Frequency (Hz)");
  app.add_option("--grid", o.grid, "Samples per side of the scan grid");
  app.add_option("--spacing", o.spacing, "Grid spacing in wavelengths");
  app.add_option("--zd", o.zd, "Scan-plane distance in wavelengths");
  app.add_option("--out", o.out, "Output field-map bundle directory")->required();
}

void run_synth_map(const SynthMapOpts& o, std::ostream& out) {
  const AntennaScene scene = random_scene(o.seed, parse_scene_profile(o.profile), o.freq);
  const GridSpec grid = GridSpec::square(o.grid, o.freq, o.spacing, o.zd);
  const FieldMap map = synthesize_nearfield(scene, grid);
  save_field_map(map, o.out, &scene);
  const TruncationCheck t = check_truncation(map);
  out << "field map " << o.out << ": " << o.grid << "x" << o.grid << ", "
      << scene.sources.size() << " dipoles, polarization " << dominant_polarization(map)
      << ", border margin " << format_number(t.margin_db) << " dB ("
      << (t.passes ? "passes" : "fails") << " the 40 dB truncation check)\n";
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string data;
  std::string channel;
  std::string preset = "paper";
  std::uint64_t seed = 0;
  std::string out;
  std::optional<int> epochs;
  std::optional<int> decay_every;
  std::optional<int> base_channels;
  int batch = 15;
  double lr = 1e-3;
  double decay_factor = 10.0;
  int stages = 4;
  bool no_residual = false;
  std::string variant = "symmetric";
  double alpha_mag = 1.0;
  double beta_mag = 1.0;
  double alpha_phase = 0.6;
  double beta_phase = 0.4;
  std::string loss_csv;
};

void add_train(CLI::App& app, TrainOpts& o) {
  app.add_option("--data", o.data, "Dataset bundle directory")->required();
  app.add_option("--channel", o.channel, "Channel to train")
      ->required()
      ->check(CLI::IsMember({"mag", "magnitude", "phase"}));
  app.add_option("--preset", o.preset, "paper: 200/300 epochs, 64 base channels; toy: 30 epochs, 16")
      ->check(CLI::IsMember({"paper", "toy"}));
  app.add_option("--seed", o.seed, "Initialization and shuffling seed")->required();
  app.add_option("--out", o.out, "Output parameter bundle directory")->required();
  app.add_option("--epochs", o.epochs, "Total epochs (overrides the preset)");
  app.add_option("--decay-every", o.decay_every, "Epochs between learning-rate decays (overrides the preset)");
  app.add_option("--base-channels", o.base_channels, "Channels of the first stage (overrides the preset)");
  app.add_option("--batch", o.batch, "Mini-batch size");
  app.add_option("--lr", o.lr, "Initial learning rate");
  app.add_option("--decay-factor", o.decay_factor, "Learning-rate divisor at each decay");
  app.add_option("--stages", o.stages, "Encoder stages");
  app.add_flag("--no-residual", o.no_residual, "Plain sigmoid head without the input skip");
  app.add_option("--variant", o.variant, "Periodic phase loss variant")
      ->check(CLI::IsMember({"symmetric", "paper_literal"}));
  app.add_option("--alpha-mag", o.alpha_mag, "MAE weight of the magnitude loss");
  app.add_option("--beta-mag", o.beta_mag, "MS-SSIM weight of the magnitude loss");
  app.add_option("--alpha-phase", o.alpha_phase, "Periodic phase loss weight");
  app.add_option("--beta-phase", o.beta_phase, "MS-SSIM weight of the phase loss");
  app.add_option("--loss-csv", o.loss_csv, "Loss history CSV (default: <out>/loss.csv)");
}

void run_train(const TrainOpts& o, std::ostream& out) {
  const ChannelKind kind = parse_channel_kind(o.channel);
  const bool toy = o.preset == "toy";
  TrainConfig tc = toy ? TrainConfig::toy(kind) : TrainConfig::paper(kind);
  if (o.epochs) tc.total_epochs = *o.epochs;
  if (o.decay_every) tc.decay_every = *o.decay_every;
  tc.batch_size = o.batch;
  tc.lr0 = o.lr;
  tc.lr_decay_factor = o.decay_factor;
  tc.seed = o.seed;
  tc.validate();

  UNetConfig uc;
  uc.base_channels = o.base_channels.value_or(toy ? 16 : 64);
  uc.stages = o.stages;
  uc.residual = !o.no_residual;

  LossOptions loss;
  loss.weights = {o.alpha_mag, o.beta_mag, o.alpha_phase, o.beta_phase};
  loss.variant = o.variant == "symmetric" ? PhaseLossVariant::Symmetric : PhaseLossVariant::PaperLiteral;

  const Dataset data(o.data);
  uc.in_size = data.manifest().grid_n;
  uc.pad_to = ((uc.in_size + (1 << uc.stages) - 1) >> uc.stages) << uc.stages;
  uc.validate();

  const fs::path csv = o.loss_csv.empty() ? fs::path(o.out) / "loss.csv" : fs::path(o.loss_csv);
  out << std::setprecision(6);
  try {
    const TrainResult r = train(data, kind, tc, uc, loss, [&](const EpochRecord& e) {
      out << "epoch " << e.epoch << "/" << tc.total_epochs << "  train " << e.train_loss
          << "  val " << e.val_loss << "  lr " << e.lr << "\n"
          << std::flush;
    });
    nlohmann::json meta = {{"channel", to_string(kind)},
                           {"factor", data.manifest().factor},
                           {"seed", o.seed},
                           {"preset", o.preset},
                           {"epochs", tc.total_epochs},
                           {"initial_val_loss", r.initial_val_loss}};
    save_params(r.net, o.out, meta);
    write_loss_csv(r.history, csv);
    out << "saved " << o.out << " (initial val " << r.initial_val_loss << ", final val "
        << (r.history.empty() ? r.initial_val_loss : r.history.back().val_loss) << ")\n";
  } catch (const TrainingDiverged& e) {
    write_loss_csv(e.history(), csv);
    throw;
  }
}

// ---------------------------------------------------------------- shared restoration flags

struct RestoreFlags {
  std::string mag_params;
  std::string phase_params;
  int kriging_neighbors = 16;
  double cs_lambda = 1e-3;
  int cs_iters = 500;
};

void add_restore_flags(CLI::App& app, RestoreFlags& o) {
  app.add_option("--mag-params", o.mag_params, "Magnitude network parameter bundle");
  app.add_option("--phase-params", o.phase_params, "Phase network parameter bundle");
  app.add_option("--kriging-neighbors", o.kriging_neighbors, "Nearest samples per kriging estimate");
  app.add_option("--cs-lambda", o.cs_lambda, "Sparsity weight of the DCT reconstruction");
  app.add_option("--cs-iters", o.cs_iters, "Iteration budget of the DCT reconstruction");
}

RestoreContext restore_context(const RestoreFlags& o) {
  RestoreContext ctx;
  ctx.kriging.neighbors = o.kriging_neighbors;
  ctx.cs.lambda = o.cs_lambda;
  ctx.cs.iters = o.cs_iters;
  ctx.cs.validate();
  if (ctx.kriging.neighbors < 1) throw ConfigError("--kriging-neighbors must be >= 1");
  return ctx;
}

std::optional<NetPair> load_nets(const std::string& mag, const std::string& phase) {
  if (mag.empty() && phase.empty()) return std::nullopt;
  if (mag.empty() || phase.empty())
    throw ConfigError("magnitude and phase parameters must be given together");
  return NetPair{load_params(mag), load_params(phase)};
}

// ---------------------------------------------------------------- restore

struct RestoreOpts {
  std::string in;
  std::string out;
  std::string method = "nfsnet";
  int factor = 3;
  RestoreFlags flags;
};

void add_restore(CLI::App& app, RestoreOpts& o) {
  app.add_option("--in", o.in, "Fully-sampled field-map bundle to undersample and restore")->required();
  app.add_option("--out", o.out, "Output field-map bundle directory")->required();
  app.add_option("--method", o.method, "Restoration method")
      ->check(CLI::IsMember({"nfsnet", "bicubic", "kriging", "cs"}));
  app.add_option("--factor", o.factor, "Downsampling factor (2 or 3)");
  add_restore_flags(app, o.flags);
}

void run_restore(const RestoreOpts& o, std::ostream& out) {
  const Method method = parse_method(o.method);
  RestoreContext ctx = restore_context(o.flags);
  const auto nets = load_nets(o.flags.mag_params, o.flags.phase_params);
  if (nets) ctx.nets = &*nets;
  const FieldMapFile in = load_field_map(o.in);
  const FieldChannels truth = split_channels(in.map);
  FieldChannels restored;
  for (auto c : {FieldComponent::Ex, FieldComponent::Ey})
    for (auto k : {ChannelKind::Magnitude, ChannelKind::Phase}) {
      const ChannelMap& high = truth.get(c, k);
      if (high.rows() != high.cols()) throw ConfigError("restoration needs a square grid");
      restored.get(c, k) = restore_map(method, downsample(high, o.factor), high.rows(), ctx);
    }
  const FieldMap map = recombine(in.map.grid, restored);
  save_field_map(map, o.out, in.scene ? &*in.scene : nullptr);
  out << "restored " << o.in << " -> " << o.out << " with " << o.method << " (factor "
      << o.factor << ", " << downsampled_size(truth.magnitude[0].rows(), o.factor) << "x"
      << downsampled_size(truth.magnitude[0].cols(), o.factor) << " samples kept)\n";
}

// ---------------------------------------------------------------- nf2ff

struct Nf2ffOpts {
  std::string in;
  std::string cut = "E";
  std::string out;
  int pad = kDefaultPadFactor;
  double theta_step = 1.0;
  std::string pol = "auto";
  bool analytic = false;
  double floor = -30.0;
};

void add_nf2ff(CLI::App& app, Nf2ffOpts& o) {
  app.add_option("--in", o.in, "Field-map bundle")->required();
  app.add_option("--cut", o.cut, "Principal plane")->check(CLI::IsMember({"E", "H"}));
  app.add_option("--out", o.out, "Output cut CSV (angle_deg,level_db)")->required();
  app.add_option("--pad", o.pad, "Zero-padding factor of the spectrum DFT");
  app.add_option("--theta-step", o.theta_step, "Angular step in degrees");
  app.add_option("--pol", o.pol, "Polarization axis of the cut")->check(CLI::IsMember({"auto", "x", "y"}));
  app.add_flag("--analytic", o.analytic, "Write the analytic cut of the stored scene instead");
  app.add_option("--floor", o.floor, "Floor (dB) of the reported pattern error");
}

void run_nf2ff(const Nf2ffOpts& o, std::ostream& out) {
  const FieldMapFile in = load_field_map(o.in);
  const char pol = o.pol == "auto" ? dominant_polarization(in.map) : o.pol[0];
  PipelineOptions po;
  po.pad_factor = o.pad;
  po.theta_step_deg = o.theta_step;
  po.floor_db = o.floor;
  if (o.analytic && !in.scene) throw ConfigError(o.in + " does not record its scene");
  const CutPair cuts = o.analytic ? analytic_cuts(*in.scene, pol, po) : transformed_cuts(in.map, pol, po);
  const PatternCut& cut = o.cut == "E" ? cuts.e : cuts.h;
  write_cut_csv(cut, o.out);
  out << o.cut << "-plane cut (" << pol << " polarization, " << cut.angle_deg.size()
      << " angles) -> " << o.out << "\n";
  if (!o.analytic && in.scene) {
    const CutPair ref = analytic_cuts(*in.scene, pol, po);
    const PatternCut& r = o.cut == "E" ? ref.e : ref.h;
    out << "pattern error vs analytic: " << format_number(pattern_error(r, cut, o.floor))
        << " dB (floor " << format_number(o.floor) << " dB)\n";
  }
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string data;
  std::string study = "compare";
  std::string out;
  std::optional<std::uint64_t> seed;
  RestoreFlags flags;
  std::string mag_params_f2;
  std::string phase_params_f2;
  std::vector<std::string> methods;
  int factor = 3;
  std::vector<double> snr{10, 15, 20, 25, 30, 40};
  std::string snr_method = "nfsnet";
  double floor = -30.0;
  double alt_floor = -40.0;
  int pad = kDefaultPadFactor;
  int max_scenes = 0;
  bool plots = false;
};

void add_eval(CLI::App& app, EvalOpts& o) {
  app.add_option("--data", o.data, "Dataset bundle whose held-out scenes are evaluated")->required();
  app.add_option("--study", o.study, "Study to run")
      ->check(CLI::IsMember({"compare", "factor", "attribution", "snr"}));
  app.add_option("--out", o.out, "Report directory")->required();
  app.add_option("--seed", o.seed, "Noise seed (required by the snr study)");
  add_restore_flags(app, o.flags);
  app.add_option("--mag-params-f2", o.mag_params_f2, "Magnitude network for factor 2 (factor study)");
  app.add_option("--phase-params-f2", o.phase_params_f2, "Phase network for factor 2 (factor study)");
  app.add_option("--methods", o.methods,
                 "Methods (default: identity,nfsnet,bicubic,kriging,cs; factor study: identity,nfsnet,bicubic)")
      ->delimiter(',');
  app.add_option("--factor", o.factor, "Downsampling factor of the compare, attribution and snr studies");
  app.add_option("--snr", o.snr, "SNR levels in dB (snr study)")->delimiter(',');
  app.add_option("--snr-method", o.snr_method, "Restoration method of the snr study")
      ->check(CLI::IsMember({"identity", "nfsnet", "bicubic", "kriging", "cs"}));
  app.add_option("--floor", o.floor, "Pattern error floor in dB");
  app.add_option("--alt-floor", o.alt_floor, "Second floor reported for sensitivity");
  app.add_option("--pad", o.pad, "Zero-padding factor of the spectrum DFT");
  app.add_option("--max-scenes", o.max_scenes, "Evaluate only the first N held-out scenes (0: all)");
  app.add_flag("--plots", o.plots, "Write E/H cut overlays per scene (compare and factor studies)");
}

nlohmann::json metrics_json(const MethodSummary& s) {
  return {{"method", to_string(s.method)},
          {"factor", s.factor},
          {"scenes", s.scenes},
          {"failed", s.failed},
          {"mag_mae", s.metrics.mag_mae},
          {"phase_lpp", s.metrics.phase_lpp},
          {"mag_msssim", s.metrics.mag_msssim},
          {"phase_msssim", s.metrics.phase_msssim},
          {"pattern_error_db", s.errors.mean},
          {"pattern_error_alt_floor_db", s.errors.alt_mean},
          {"within_3db_of_identity", s.within_3db_of_identity},
          {"below_identity", s.below_identity}};
}

void write_plots(const std::vector<EvalRow>& rows, const fs::path& dir) {
  std::map<std::pair<int, int>, std::vector<const EvalRow*>> by_cell;
  for (const EvalRow& r : rows)
    if (r.ok && r.cuts) by_cell[{r.scene, r.factor}].push_back(&r);
  for (const auto& [key, cell] : by_cell) {
    for (CutPlane plane : {CutPlane::E, CutPlane::H}) {
      const char* pname = plane == CutPlane::E ? "E" : "H";
      std::vector<CutSeries> series;
      series.push_back({"analytic", plane == CutPlane::E ? cell.front()->reference->e
                                                         : cell.front()->reference->h});
      for (const EvalRow* r : cell)
        series.push_back({to_string(r->method), plane == CutPlane::E ? r->cuts->e : r->cuts->h});
      const std::string stem = "scene" + std::to_string(key.first) + "_f" +
                               std::to_string(key.second) + "_" + pname;
      write_overlay_svg(dir / (stem + ".svg"),
                        "scene " + std::to_string(key.first) + ", factor " +
                            std::to_string(key.second) + ", " + pname + "-plane",
                        series);
    }
  }
}

void run_eval(const EvalOpts& o, const Global& g, std::ostream& out) {
  if (o.study == "snr" && !o.seed) throw ConfigError("the snr study requires --seed");
  StudyOptions so;
  so.restore = restore_context(o.flags);
  so.threads = g.threads;
  so.seed = o.seed.value_or(0);
  so.pipeline.factor = o.factor;
  so.pipeline.floor_db = o.floor;
  so.pipeline.alt_floor_db = o.alt_floor;
  so.pipeline.pad_factor = o.pad;
  so.snr_list = o.snr;
  so.snr_method = parse_method(o.snr_method);
  so.keep_cuts = o.plots;
  if (auto nets = load_nets(o.flags.mag_params, o.flags.phase_params))
    so.nets_by_factor.emplace(o.study == "factor" ? 3 : o.factor, std::move(*nets));
  if (auto nets = load_nets(o.mag_params_f2, o.phase_params_f2))
    so.nets_by_factor.emplace(2, std::move(*nets));

  if (!o.methods.empty()) {
    so.methods.clear();
    for (const auto& m : o.methods) so.methods.push_back(parse_method(m));
  } else if (o.study == "factor") {
    so.methods = {Method::Identity, Method::NfsNet, Method::Bicubic};
  }
  if (o.study == "factor") so.factors = {2, 3};
  else so.factors = {o.factor};

  const Dataset data(o.data);
  std::vector<EvalScene> scenes = held_out_scenes(data.manifest());
  if (o.max_scenes > 0 && scenes.size() > static_cast<std::size_t>(o.max_scenes))
    scenes.resize(static_cast<std::size_t>(o.max_scenes));
  if (scenes.empty()) throw ConfigError(o.data + " has no held-out scenes");

  const fs::path dir(o.out);
  nlohmann::json report = {
      {"study", o.study},
      {"dataset", o.data},
      {"scenes", scenes.size()},
      {"floor_db", o.floor},
      {"alt_floor_db", o.alt_floor},
      {"pad_factor", o.pad},
      {"notes",
       {"map metrics are computed on normalized [0,1] maps and averaged over ex and ey; "
        "each scene row therefore averages the four channels ex/ey x magnitude/phase",
        "pattern errors are mean absolute dB differences of the E- and H-plane cuts against "
        "the analytic far field, over angles where either cut is above the floor",
        "cs is an ISTA/DCT stand-in for compressive sensing"}}};

  if (o.study == "compare" || o.study == "factor") {
    const auto rows = run_comparison(scenes, so);
    const auto summary = summarize(rows);
    write_comparison_csv(rows, dir / (o.study + ".csv"));
    write_summary_csv(summary, dir / (o.study + "_summary.csv"));
    if (o.plots) write_plots(rows, dir / "plots");
    auto& js = report["summary"] = nlohmann::json::array();
    for (const auto& s : summary) js.push_back(metrics_json(s));
    out << std::left << std::setw(10) << "method" << std::setw(8) << "factor" << std::setw(8)
        << "scenes" << std::setw(12) << "mag_mae" << std::setw(12) << "phase_lpp" << "error_db\n";
    for (const auto& s : summary)
      out << std::setw(10) << to_string(s.method) << std::setw(8) << s.factor << std::setw(8)
          << s.scenes << std::setw(12) << format_number(s.metrics.mag_mae) << std::setw(12)
          << format_number(s.metrics.phase_lpp) << format_number(s.errors.mean)
          << (s.failed ? "  (" + std::to_string(s.failed) + " failed)" : "") << "\n";
  } else if (o.study == "attribution") {
    const auto rows = run_attribution(scenes, so);
    write_attribution_csv(rows, dir / "attribution.csv");
    double acc[4] = {0, 0, 0, 0};
    int n = 0;
    for (const auto& r : rows) {
      if (!r.ok) continue;
      ++n;
      acc[0] += r.values.gm_gp;
      acc[1] += r.values.gm_rp;
      acc[2] += r.values.rm_gp;
      acc[3] += r.values.rm_rp;
    }
    if (n == 0) throw NumericError("attribution failed on every scene");
    for (double& a : acc) a /= n;
    const bool phase_dominant = acc[1] > acc[2] && acc[3] > acc[2];
    report["summary"] = {{"gm_gp_db", acc[0]}, {"gm_rp_db", acc[1]},   {"rm_gp_db", acc[2]},
                         {"rm_rp_db", acc[3]}, {"scenes", n},
                         {"restored_phase_dominates", phase_dominant}};
    out << "GM GP " << format_number(acc[0]) << " dB, GM RP " << format_number(acc[1])
        << " dB, RM GP " << format_number(acc[2]) << " dB, RM RP " << format_number(acc[3])
        << " dB over " << n << " scenes; restored phase "
        << (phase_dominant ? "dominates" : "does not dominate") << " the error\n";
  } else {
    const auto rows = run_snr(scenes, so);
    write_snr_csv(rows, dir / "snr.csv");
    auto& js = report["summary"] = nlohmann::json::array();
    bool monotone = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      js.push_back({{"snr_db", rows[k].snr_db}, {"mean_error_db", rows[k].mean_error}});
      for (std::size_t j = 0; j < rows.size(); ++j)
        if (rows[j].snr_db > rows[k].snr_db && rows[j].mean_error > rows[k].mean_error)
          monotone = false;
    }
    report["monotone_in_snr"] = monotone;
    out << "snr_db  mean_error_db\n";
    for (const auto& r : rows)
      out << std::setw(8) << format_number(r.snr_db) << format_number(r.mean_error) << "\n";
  }
  write_json(report, dir / "report.json");
  out << "report written to " << o.out << "\n";
}

// ---------------------------------------------------------------- plot

struct PlotOpts {
  std::vector<std::string> overlay;
  std::vector<std::string> labels;
  std::string title = "far-field cut";
  std::string out;
  double floor = kPlotFloorDb;
};

void add_plot(CLI::App& app, PlotOpts& o) {
  app.add_option("--overlay", o.overlay, "Cut CSV files; the first is drawn solid")
      ->required()
      ->delimiter(',');
  app.add_option("--labels", o.labels, "Legend labels (default: file stems)")->delimiter(',');
  app.add_option("--title", o.title, "Plot title");
  app.add_option("--out", o.out, "Output SVG file")->required();
  app.add_option("--floor", o.floor, "Lowest level drawn (dB)");
}

void run_plot(const PlotOpts& o, std::ostream& out) {
  if (!o.labels.empty() && o.labels.size() != o.overlay.size())
    throw ConfigError("--labels needs one label per --overlay file");
  std::vector<CutSeries> series;
  for (std::size_t i = 0; i < o.overlay.size(); ++i)
    series.push_back({o.labels.empty() ? fs::path(o.overlay[i]).stem().string() : o.labels[i],
                      read_cut_csv(o.overlay[i])});
  write_overlay_svg(o.out, o.title, series, o.floor);
  out << "plot with " << series.size() << " cuts -> " << o.out << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Near-field super-resolution and near-field to far-field toolkit", "nfsr"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option values (flags override it)");
  app.allow_config_extras(false);

  Global g;
  app.add_option("--threads", g.threads, "Worker threads for dataset synthesis and evaluation")
      ->check(CLI::PositiveNumber);

  SynthOpts synth;
  SynthMapOpts synth_map;
  TrainOpts train_o;
  RestoreOpts restore;
  Nf2ffOpts nf2ff;
  EvalOpts eval;
  PlotOpts plot;
  auto* c_synth = app.add_subcommand("synth", "Synthesize a dataset of low/high-resolution map pairs");
  auto* c_synth_map = app.add_subcommand("synth-map", "Synthesize one near-field map bundle");
  auto* c_train = app.add_subcommand("train", "Train the magnitude or phase network");
  auto* c_restore = app.add_subcommand("restore", "Undersample and restore a field map");
  auto* c_nf2ff = app.add_subcommand("nf2ff", "Transform a field map and write a principal-plane cut");
  auto* c_eval = app.add_subcommand("eval", "Run an evaluation study on held-out scenes");
  auto* c_plot = app.add_subcommand("plot", "Overlay cut CSV files in one SVG");
  add_synth(*c_synth, synth);
  add_synth_map(*c_synth_map, synth_map);
  add_train(*c_train, train_o);
  add_restore(*c_restore, restore);
  add_nf2ff(*c_nf2ff, nf2ff);
  add_eval(*c_eval, eval);
  add_plot(*c_plot, plot);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_synth) run_synth(synth, g, out);
    else if (*c_synth_map) run_synth_map(synth_map, out);
    else if (*c_train) run_train(train_o, out);
    else if (*c_restore) run_restore(restore, out);
    else if (*c_nf2ff) run_nf2ff(nf2ff, out);
    else if (*c_eval) run_eval(eval, g, out);
    else if (*c_plot) run_plot(plot, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace nfsr::cli
