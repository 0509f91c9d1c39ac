#include "nfsr/eval.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "nfsr/error.hpp"
#include "nfsr/losses.hpp"
#include "nfsr/rng.hpp"

namespace nfsr {

std::string to_string(Method m) {
  switch (m) {
    case Method::Identity: return "identity";
    case Method::NfsNet: return "nfsnet";
    case Method::Bicubic: return "bicubic";
    case Method::Kriging: return "kriging";
    case Method::Cs: return "cs";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::Identity, Method::NfsNet, Method::Bicubic, Method::Kriging, Method::Cs})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + s + "' (expected identity, nfsnet, bicubic, kriging or cs)");
}

ChannelMap restore_map(Method method, const ChannelMap& low, std::size_t target,
                       const RestoreContext& ctx) {
  switch (method) {
    case Method::NfsNet: {
      if (!ctx.nets) throw ConfigError("nfsnet restoration needs trained networks");
      const UNet<float>& net =
          low.kind == ChannelKind::Magnitude ? ctx.nets->magnitude : ctx.nets->phase;
      if (static_cast<std::size_t>(net.config().in_size) != target)
        throw ConfigError("network expects " + std::to_string(net.config().in_size) +
                          "-pixel maps, got target " + std::to_string(target));
      return restore_with(net, low);
    }
    case Method::Bicubic: return bicubic_upsample(low, target);
    case Method::Kriging: return kriging_upsample(low, target, ctx.kriging);
    case Method::Cs: return cs_reconstruct(low, target, ctx.cs).map;
    case Method::Identity: break;
  }
  throw ConfigError("identity is not a restoration method");
}

const ChannelMap& FieldChannels::get(FieldComponent c, ChannelKind k) const {
  const auto i = static_cast<std::size_t>(c);
  return k == ChannelKind::Magnitude ? magnitude[i] : phase[i];
}

ChannelMap& FieldChannels::get(FieldComponent c, ChannelKind k) {
  const auto i = static_cast<std::size_t>(c);
  return k == ChannelKind::Magnitude ? magnitude[i] : phase[i];
}

FieldChannels split_channels(const FieldMap& map) {
  FieldChannels out;
  const ComplexMap* comps[2] = {&map.ex, &map.ey};
  for (std::size_t i = 0; i < 2; ++i) {
    out.magnitude[i] = normalize(magnitude_of(*comps[i]), ChannelKind::Magnitude);
    out.phase[i] = normalize(phase_of(*comps[i]), ChannelKind::Phase);
  }
  return out;
}

FieldMap recombine(const GridSpec& grid, const FieldChannels& channels) {
  FieldMap out;
  out.grid = grid;
  out.ex = from_polar(denormalize(channels.magnitude[0]), denormalize(channels.phase[0]));
  out.ey = from_polar(denormalize(channels.magnitude[1]), denormalize(channels.phase[1]));
  return out;
}

namespace {

// Runs one pipeline stage and prefixes any library error with its name.
template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  const std::string p = std::string(stage) + ": ";
  try {
    return f();
  } catch (const DomainError& e) {
    throw DomainError(p + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(p + e.what());
  } catch (const IoError& e) {
    throw IoError(p + e.what());
  } catch (const NumericError& e) {
    throw NumericError(p + e.what());
  }
}

CutPair cuts_of(const FarFieldPattern& ff, char pol) {
  return {extract_cut(ff, CutPlane::E, pol), extract_cut(ff, CutPlane::H, pol)};
}

MapMetrics map_metrics(const FieldChannels& truth, const FieldChannels& restored) {
  MapMetrics m{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto tm = as_double(truth.magnitude[i]), rm = as_double(restored.magnitude[i]);
    const auto tp = as_double(truth.phase[i]), rp = as_double(restored.phase[i]);
    m.mag_mae += 0.5 * mae(tm, rm).value;
    m.mag_msssim += 0.5 * ms_ssim(tm, rm).value;
    m.phase_lpp += 0.5 * periodic_phase_loss(tp, rp).value;
    m.phase_msssim += 0.5 * ms_ssim(tp, rp).value;
  }
  return m;
}

struct Prepared {
  FieldChannels truth;  // normalized high-resolution channels of the (noisy) map
  char polarization = 'x';
  CutPair reference;
};

Prepared prepare(const AntennaScene& scene, const GridSpec& grid, const PipelineOptions& opt) {
  Prepared p;
  FieldMap map = staged("synthesize", [&] { return synthesize_nearfield(scene, grid); });
  p.polarization = dominant_polarization(map);
  if (opt.snr_db) map = staged("noise", [&] { return add_noise(map, *opt.snr_db, opt.noise_seed); });
  p.truth = staged("normalize", [&] { return split_channels(map); });
  p.reference = staged("analytic far field", [&] { return analytic_cuts(scene, p.polarization, opt); });
  return p;
}

FieldChannels restore_all(const FieldChannels& truth, Method method, const PipelineOptions& opt,
                          const RestoreContext& ctx) {
  if (method == Method::Identity) return truth;
  FieldChannels out;
  for (auto c : {FieldComponent::Ex, FieldComponent::Ey})
    for (auto k : {ChannelKind::Magnitude, ChannelKind::Phase}) {
      const ChannelMap& high = truth.get(c, k);
      const ChannelMap low = staged("downsample", [&] { return downsample(high, opt.factor); });
      out.get(c, k) = staged("restore", [&] { return restore_map(method, low, high.rows(), ctx); });
    }
  return out;
}

double pattern_error_of(const FieldChannels& channels, const GridSpec& grid, const Prepared& p,
                        const PipelineOptions& opt) {
  const FieldMap map = staged("denormalize", [&] { return recombine(grid, channels); });
  const CutPair cuts = staged("nf2ff", [&] { return transformed_cuts(map, p.polarization, opt); });
  return compare_cuts(p.reference, cuts, opt).mean;
}

}  // namespace

CutPair transformed_cuts(const FieldMap& map, char polarization, const PipelineOptions& opt) {
  const auto theta = default_theta_axis(opt.theta_step_deg);
  const auto phi = principal_phi_axis();
  const PlaneWaveSpectrum spec = plane_wave_spectrum(map, opt.pad_factor);
  return cuts_of(to_farfield(spec, theta, phi), polarization);
}

CutPair analytic_cuts(const AntennaScene& scene, char polarization, const PipelineOptions& opt) {
  const auto theta = default_theta_axis(opt.theta_step_deg);
  const auto phi = principal_phi_axis();
  return cuts_of(analytic_farfield(scene, theta, phi), polarization);
}

PatternErrors compare_cuts(const CutPair& reference, const CutPair& cuts, const PipelineOptions& opt) {
  PatternErrors e;
  e.e = pattern_error(reference.e, cuts.e, opt.floor_db);
  e.h = pattern_error(reference.h, cuts.h, opt.floor_db);
  e.mean = 0.5 * (e.e + e.h);
  e.alt_mean = 0.5 * (pattern_error(reference.e, cuts.e, opt.alt_floor_db) +
                      pattern_error(reference.h, cuts.h, opt.alt_floor_db));
  return e;
}

PipelineResult end_to_end(const AntennaScene& scene, const GridSpec& grid, Method method,
                          const PipelineOptions& opt, const RestoreContext& ctx) {
  const Prepared p = prepare(scene, grid, opt);
  PipelineResult r;
  r.restored = restore_all(p.truth, method, opt, ctx);
  r.metrics = map_metrics(p.truth, r.restored);
  r.reference = p.reference;
  const FieldMap map = staged("denormalize", [&] { return recombine(grid, r.restored); });
  r.cuts = staged("nf2ff", [&] { return transformed_cuts(map, p.polarization, opt); });
  r.errors = compare_cuts(r.reference, r.cuts, opt);
  return r;
}

Attribution error_attribution(const AntennaScene& scene, const GridSpec& grid,
                              const PipelineOptions& opt, const RestoreContext& ctx) {
  const Prepared p = prepare(scene, grid, opt);
  const FieldChannels restored = restore_all(p.truth, Method::NfsNet, opt, ctx);
  auto mix = [&](bool restored_mag, bool restored_phase) {
    FieldChannels c;
    c.magnitude = (restored_mag ? restored : p.truth).magnitude;
    c.phase = (restored_phase ? restored : p.truth).phase;
    return pattern_error_of(c, grid, p, opt);
  };
  return {mix(false, false), mix(false, true), mix(true, false), mix(true, true)};
}

std::vector<SnrPoint> snr_sweep(const AntennaScene& scene, const GridSpec& grid, Method method,
                                const std::vector<double>& snr_list, std::uint64_t seed,
                                const PipelineOptions& opt, const RestoreContext& ctx) {
  std::vector<SnrPoint> out;
  out.reserve(snr_list.size());
  for (double snr : snr_list) {
    if (!std::isfinite(snr)) throw ConfigError("SNR levels must be finite");
    PipelineOptions o = opt;
    o.snr_db = snr;
    o.noise_seed = derive_seed(seed, static_cast<std::uint64_t>(std::llround(snr * 1000.0)));
    out.push_back({snr, end_to_end(scene, grid, method, o, ctx).errors.mean});
  }
  return out;
}

std::vector<EvalScene> held_out_scenes(const DatasetManifest& manifest) {
  std::vector<EvalScene> out;
  for (const SceneRecord& s : manifest.scenes)
    if (!s.train) out.push_back({s.index, s.scene(), manifest.grid_for(s)});
  return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; each index is handled
// by exactly one worker, so callers write into per-index slots.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

RestoreContext context_for(const StudyOptions& opt, int factor) {
  RestoreContext ctx = opt.restore;
  const auto it = opt.nets_by_factor.find(factor);
  ctx.nets = it == opt.nets_by_factor.end() ? nullptr : &it->second;
  return ctx;
}

template <class Row>
void mark_failed(Row& row, const std::exception& e) {
  row.ok = false;
  row.status = std::string("failed: ") + e.what();
}

}  // namespace

std::vector<EvalRow> run_comparison(const std::vector<EvalScene>& scenes, const StudyOptions& opt) {
  std::vector<std::vector<EvalRow>> per_scene(scenes.size());
  parallel_for(scenes.size(), opt.threads, [&](std::size_t i) {
    const EvalScene& s = scenes[i];
    std::optional<EvalRow> identity;
    for (int factor : opt.factors) {
      PipelineOptions po = opt.pipeline;
      po.factor = factor;
      const RestoreContext ctx = context_for(opt, factor);
      for (Method m : opt.methods) {
        EvalRow row{s.id, m, factor, true, "ok", {}, {}, {}, {}};
        if (m == Method::Identity && identity) {
          row = *identity;
          row.factor = factor;
          per_scene[i].push_back(row);
          continue;
        }
        try {
          const PipelineResult r = end_to_end(s.scene, s.grid, m, po, ctx);
          row.metrics = r.metrics;
          row.errors = r.errors;
          if (opt.keep_cuts) {
            row.reference = r.reference;
            row.cuts = r.cuts;
          }
        } catch (const std::exception& e) {
          mark_failed(row, e);
        }
        if (m == Method::Identity) identity = row;
        per_scene[i].push_back(row);
      }
    }
  });
  std::vector<EvalRow> rows;
  for (auto& v : per_scene) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::vector<AttributionRow> run_attribution(const std::vector<EvalScene>& scenes,
                                            const StudyOptions& opt) {
  std::vector<AttributionRow> rows(scenes.size());
  const RestoreContext ctx = context_for(opt, opt.pipeline.factor);
  parallel_for(scenes.size(), opt.threads, [&](std::size_t i) {
    AttributionRow& row = rows[i];
    row.scene = scenes[i].id;
    row.status = "ok";
    try {
      row.values = error_attribution(scenes[i].scene, scenes[i].grid, opt.pipeline, ctx);
      row.identity = row.values.gm_gp;
    } catch (const std::exception& e) {
      mark_failed(row, e);
    }
  });
  return rows;
}

std::vector<SnrRow> run_snr(const std::vector<EvalScene>& scenes, const StudyOptions& opt) {
  const std::size_t n_snr = opt.snr_list.size();
  std::vector<std::vector<double>> errors(scenes.size());
  std::vector<double> identity(scenes.size(), 0.0);
  std::vector<char> ok(scenes.size(), 1);
  const RestoreContext ctx = context_for(opt, opt.pipeline.factor);
  parallel_for(scenes.size(), opt.threads, [&](std::size_t i) {
    const EvalScene& s = scenes[i];
    try {
      const auto sweep = snr_sweep(s.scene, s.grid, opt.snr_method, opt.snr_list,
                                   derive_seed(opt.seed, static_cast<std::uint64_t>(s.id)),
                                   opt.pipeline, ctx);
      for (const SnrPoint& p : sweep) errors[i].push_back(p.error);
      PipelineOptions clean = opt.pipeline;
      clean.snr_db.reset();
      identity[i] = end_to_end(s.scene, s.grid, Method::Identity, clean, ctx).errors.mean;
    } catch (const std::exception&) {
      ok[i] = 0;
    }
  });
  std::vector<SnrRow> rows(n_snr);
  for (std::size_t k = 0; k < n_snr; ++k) {
    rows[k].snr_db = opt.snr_list[k];
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      if (!ok[i]) continue;
      ++rows[k].scenes;
      rows[k].mean_error += errors[i][k];
      rows[k].mean_identity += identity[i];
    }
    if (rows[k].scenes == 0) throw NumericError("SNR sweep failed on every scene");
    rows[k].mean_error /= rows[k].scenes;
    rows[k].mean_identity /= rows[k].scenes;
  }
  return rows;
}

std::vector<MethodSummary> summarize(const std::vector<EvalRow>& rows) {
  std::map<std::pair<int, int>, double> identity;  // (scene, factor) -> error
  for (const EvalRow& r : rows)
    if (r.method == Method::Identity && r.ok) identity[{r.scene, r.factor}] = r.errors.mean;

  std::vector<MethodSummary> out;
  auto find = [&](Method m, int f) -> MethodSummary& {
    for (auto& s : out)
      if (s.method == m && s.factor == f) return s;
    MethodSummary s;
    s.method = m;
    s.factor = f;
    s.metrics = {0.0, 0.0, 0.0, 0.0};
    out.push_back(s);
    return out.back();
  };
  for (const EvalRow& r : rows) {
    MethodSummary& s = find(r.method, r.factor);
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    ++s.scenes;
    s.metrics.mag_mae += r.metrics.mag_mae;
    s.metrics.phase_lpp += r.metrics.phase_lpp;
    s.metrics.mag_msssim += r.metrics.mag_msssim;
    s.metrics.phase_msssim += r.metrics.phase_msssim;
    s.errors.e += r.errors.e;
    s.errors.h += r.errors.h;
    s.errors.mean += r.errors.mean;
    s.errors.alt_mean += r.errors.alt_mean;
    const auto it = identity.find({r.scene, r.factor});
    if (it != identity.end()) {
      if (r.errors.mean <= it->second + 3.0) ++s.within_3db_of_identity;
      if (r.errors.mean < it->second - 1e-9) ++s.below_identity;
    }
  }
  for (auto& s : out) {
    if (s.scenes == 0) continue;
    const double n = s.scenes;
    s.metrics.mag_mae /= n;
    s.metrics.phase_lpp /= n;
    s.metrics.mag_msssim /= n;
    s.metrics.phase_msssim /= n;
    s.errors.e /= n;
    s.errors.h /= n;
    s.errors.mean /= n;
    s.errors.alt_mean /= n;
  }
  return out;
}

}  // namespace nfsr
