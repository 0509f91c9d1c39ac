// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   nfsr_acceptance [--work DIR] [--reuse] [N ...]
//
// With no numbers every criterion runs. --reuse keeps trained networks found in
// the work directory instead of retraining them (development only; the ctest
// entry always trains from scratch).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../common/fd.hpp"
#include "nfsr/baselines.hpp"
#include "nfsr/cli.hpp"
#include "nfsr/eval.hpp"
#include "nfsr/losses.hpp"
#include "nfsr/nf2ff.hpp"
#include "nfsr/trainer.hpp"

using namespace nfsr;
using nfsr::testing::check_gradient;
using nfsr::testing::random_map;
using nfsr::testing::smooth_map;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void log(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

// ---------------------------------------------------------------- shared state

constexpr std::uint64_t kDataSeed = 2024;
constexpr std::uint64_t kTrainSeed = 7;
constexpr int kScenes = 80;

struct Workspace {
  fs::path dir;
  bool reuse = false;

  fs::path data(int factor) const { return dir / ("data_f" + std::to_string(factor)); }
  fs::path params(int factor, ChannelKind kind) const {
    return dir / ("net_f" + std::to_string(factor) + "_" + to_string(kind));
  }
};

const Dataset& dataset(const Workspace& ws, int factor) {
  static std::map<int, std::unique_ptr<Dataset>> cache;
  auto& slot = cache[factor];
  if (!slot) {
    const fs::path dir = ws.data(factor);
    if (!(ws.reuse && fs::exists(dir / "manifest.json"))) {
      DatasetConfig dc;
      dc.n_scenes = kScenes;
      dc.factor = factor;
      dc.seed = kDataSeed;
      fs::remove_all(dir);
      build_dataset(dc, dir);
    }
    slot = std::make_unique<Dataset>(dir);
  }
  return *slot;
}

struct Trained {
  UNet<float> net;
  double initial_val = 0.0;
  double final_val = 0.0;
};

Trained& trained(const Workspace& ws, int factor, ChannelKind kind) {
  static std::map<std::pair<int, ChannelKind>, std::unique_ptr<Trained>> cache;
  auto& slot = cache[{factor, kind}];
  if (slot) return *slot;
  const fs::path dir = ws.params(factor, kind);
  if (ws.reuse && fs::exists(dir / "manifest.json")) {
    const auto meta = params_meta(dir);
    slot = std::make_unique<Trained>(
        Trained{load_params(dir), meta.at("initial_val_loss").get<double>(), meta.at("final_val_loss").get<double>()});
    return *slot;
  }
  const Dataset& ds = dataset(ws, factor);
  const TrainConfig tc = [&] {
    TrainConfig c = TrainConfig::toy(kind);
    c.seed = kTrainSeed;
    return c;
  }();
  UNetConfig uc;
  uc.base_channels = 16;
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(ds, kind, tc, uc, {}, [&](const EpochRecord& e) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(fmt("f%d %s epoch %d train %.4f val %.4f (%.0f s)", factor, to_string(kind).c_str(), e.epoch,
            e.train_loss, e.val_loss, s));
  });
  save_params(r.net, dir,
              {{"initial_val_loss", r.initial_val_loss}, {"final_val_loss", r.history.back().val_loss}});
  slot = std::make_unique<Trained>(Trained{std::move(r.net), r.initial_val_loss, r.history.back().val_loss});
  return *slot;
}

NetPair nets(const Workspace& ws, int factor) {
  return {trained(ws, factor, ChannelKind::Magnitude).net, trained(ws, factor, ChannelKind::Phase).net};
}

std::vector<EvalScene> held_out(const Workspace& ws) {
  return held_out_scenes(dataset(ws, 3).manifest());
}

// ---------------------------------------------------------------- criteria

// Cut restricted to |angle| <= limit_deg.
PatternCut within(const PatternCut& c, double limit_deg) {
  PatternCut out;
  out.plane = c.plane;
  for (std::size_t i = 0; i < c.angle_deg.size(); ++i)
    if (std::abs(c.angle_deg[i]) <= limit_deg) {
      out.angle_deg.push_back(c.angle_deg[i]);
      out.level_db.push_back(c.level_db[i]);
    }
  return out;
}

Verdict c1_nf2ff_oracle(const Workspace&) {
  const std::vector<SceneProfile> profiles{SceneProfile::Single, SceneProfile::LinearArray,
                                           SceneProfile::PlanarArray, SceneProfile::RandomCluster};
  PipelineOptions opt;
  opt.pad_factor = 4;
  opt.floor_db = -30.0;
  int used = 0, tried = 0, bad = 0;
  double worst_e = 0.0, worst_h = 0.0, worst_inner = 0.0;
  for (std::uint64_t seed = 0; used < 20 && tried < 2000; ++seed) {
    ++tried;
    const AntennaScene scene = random_scene(seed, profiles[seed % profiles.size()]);
    const GridSpec grid = GridSpec::square(86, scene.freq_hz, 0.5, 4.0);
    if (!check_truncation(synthesize_nearfield(scene, grid), 40.0).passes) continue;
    ++used;
    const PipelineResult r = end_to_end(scene, grid, Method::Identity, opt, {});
    worst_e = std::max(worst_e, r.errors.e);
    worst_h = std::max(worst_h, r.errors.h);
    for (auto [ref, got] : {std::pair{&r.reference.e, &r.cuts.e}, std::pair{&r.reference.h, &r.cuts.h}})
      worst_inner = std::max(worst_inner, pattern_error(within(*ref, 75.0), within(*got, 75.0), opt.floor_db));
    if (r.errors.e > 1.0 || r.errors.h > 1.0) {
      ++bad;
      log(fmt("seed %llu (%s): E %.3f dB, H %.3f dB", static_cast<unsigned long long>(seed),
              to_string(profiles[seed % profiles.size()]).c_str(),
              r.errors.e, r.errors.h));
    }
  }
  return {used == 20 && bad == 0,
          fmt("%d scenes passing the 40 dB truncation check (of %d tried); worst E %.3f dB, worst H "
              "%.3f dB, %d above 1.0 dB; diagnostic: worst over |theta| <= 75 deg %.3f dB",
              used, tried, worst_e, worst_h, bad, worst_inner)};
}

Verdict c2_parseval_sign(const Workspace&) {
  Rng rng(2);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 16 + t % 40;
    const GridSpec g = GridSpec::square(n, 3e9);
    FieldMap m{g, ComplexMap(n, n), ComplexMap(n, n)};
    for (auto* c : {&m.ex, &m.ey})
      for (auto& v : *c) v = cd(rng.normal(), rng.normal());
    const int pad = 1 + t % 4;
    const PlaneWaveSpectrum s = plane_wave_spectrum(m, pad);
    double near = 0.0, spec = 0.0;
    for (std::size_t q = 0; q < m.ex.size(); ++q)
      near += std::norm(m.ex.storage()[q]) + std::norm(m.ey.storage()[q]);
    near *= g.dx * g.dy;
    for (std::size_t q = 0; q < s.fx.size(); ++q)
      spec += std::norm(s.fx.storage()[q]) + std::norm(s.fy.storage()[q]);
    spec *= (s.kx_axis[1] - s.kx_axis[0]) * (s.ky_axis[1] - s.ky_axis[0]) / (4.0 * M_PI * M_PI);
    worst = std::max(worst, std::abs(spec / near - 1.0));
  }

  int located = 0;
  for (int t = 0; t < 10; ++t) {
    const GridSpec g = GridSpec::square(64, 3e9);
    const double k0 = g.wavenumber();
    const double kx0 = rng.uniform(-0.6, 0.6) * k0, ky0 = rng.uniform(-0.6, 0.6) * k0;
    FieldMap m{g, ComplexMap(64, 64), ComplexMap(64, 64)};
    for (int j = 0; j < 64; ++j)
      for (int i = 0; i < 64; ++i) m.ey(j, i) = std::exp(cd(0.0, -(kx0 * g.x(i) + ky0 * g.y(j))));
    const PlaneWaveSpectrum s = plane_wave_spectrum(m, 4);
    std::size_t bi = 0, bj = 0;
    for (std::size_t j = 0; j < s.fy.rows(); ++j)
      for (std::size_t i = 0; i < s.fy.cols(); ++i)
        if (std::abs(s.fy(j, i)) > std::abs(s.fy(bj, bi))) bi = i, bj = j;
    const double dk = s.kx_axis[1] - s.kx_axis[0];
    located += std::abs(s.kx_axis[bi] - kx0) <= dk && std::abs(s.ky_axis[bj] - ky0) <= dk;
  }
  return {worst <= 1e-6 && located == 10,
          fmt("worst Parseval deviation %.2e over 50 maps; plane-wave peak at (+kx0, +ky0) in %d/10",
              worst, located)};
}

Verdict c3_losses(const Workspace&) {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto filled = [](std::size_t n, double v) { return Array2D<double>(n, n, v); };
  auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

  // Examples.
  expect(mae(filled(8, 0.3), filled(8, 0.3)).value == 0.0, "mae identical");
  expect(near(mae(filled(8, 0.5), filled(8, 0.25)).value, 0.25, 1e-15), "mae 0.5 vs 0.25");
  Rng rng(3);
  {
    const auto y = smooth_map(rng, 48);
    const auto same = ssim_components(y, y);
    expect(near(same.l, 1, 1e-9) && near(same.c, 1, 1e-9) && near(same.s, 1, 1e-9), "ssim identical");
    Array2D<double> shifted = y, inverted = y;
    for (auto& v : shifted) v += 0.05;
    for (auto& v : inverted) v = 1.0 - v;
    const auto sh = ssim_components(y, shifted);
    expect(near(sh.c, 1, 1e-9) && near(sh.s, 1, 1e-9) && sh.l < 1.0, "ssim constant shift");
    expect(ssim_components(y, inverted).s < 0.0, "ssim inverted");
    expect(near(ms_ssim(y, y).value, 1.0, 1e-12), "ms-ssim identical");
    MsSsimConfig one;
    one.scales = 1;
    one.scale_weights = {1.0};
    expect(near(ms_ssim(y, shifted, one).value, ssim_components(y, shifted, one).l, 1e-9),
           "ms-ssim single scale");
    const auto p = smooth_map(rng, 48);
    expect(composite_mag(y, y).value < 1e-12 && composite_phase(y, y).value < 1e-12, "composites identical");
    expect(near(composite_mag(y, p, {1, 0, 0.6, 0.4}).value, mae(y, p).value, 1e-15), "composite_mag (1,0)");
    expect(near(composite_phase(y, p, {1, 1, 1, 0}).value, periodic_phase_loss(y, p).value, 1e-15),
           "composite_phase (1,0)");
    expect(near(composite_mag(y, p).value, mae(y, p).value + 1 - ms_ssim(y, p).value, 1e-9),
           "composite_mag cross-check");
    expect(near(composite_phase(y, p).value,
                0.6 * periodic_phase_loss(y, p).value + 0.4 * (1 - ms_ssim(y, p).value), 1e-9),
           "composite_phase cross-check");
  }
  expect(near(periodic_phase_loss(filled(4, 0.99), filled(4, 0.01)).value, 0.02, 1e-12), "lpp 0.99/0.01");
  expect(near(periodic_phase_loss(filled(4, 0.01), filled(4, 0.99)).value, 0.02, 1e-12), "lpp 0.01/0.99");

  // Gradients: 20 random maps per loss, 12 pixels each.
  using Fn = std::function<LossValue(const Array2D<double>&, const Array2D<double>&)>;
  const auto away_from_ties = [](const Array2D<double>& y, const Array2D<double>& p) {
    return [&y, &p](std::size_t r, std::size_t c) {
      const double d = std::abs(y(r, c) - p(r, c));
      return d < 1e-3 || std::abs(d - 0.5) < 1e-3 || std::abs(d - 1.0) < 1e-3;
    };
  };
  const std::vector<std::pair<std::string, Fn>> losses{
      {"mae", [](auto& y, auto& p) { return mae(y, p); }},
      {"ms_ssim", [](auto& y, auto& p) { return ms_ssim(y, p); }},
      {"lpp", [](auto& y, auto& p) { return periodic_phase_loss(y, p); }},
      {"lpp_literal",
       [](auto& y, auto& p) { return periodic_phase_loss(y, p, PhaseLossVariant::PaperLiteral); }},
      {"composite_mag", [](auto& y, auto& p) { return composite_mag(y, p); }},
      {"composite_phase", [](auto& y, auto& p) { return composite_phase(y, p); }},
  };
  std::string worst_line;
  for (const auto& [name, fn] : losses) {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto y = smooth_map(rng, 48), p = smooth_map(rng, 48);
      const auto g = fn(y, p).grad;
      const auto rep = check_gradient([&](const Array2D<double>& x) { return fn(y, x).value; }, p, g, rng,
                                      12, 1e-4, 1e-8, away_from_ties(y, p));
      worst = std::max(worst, rep.max_rel_err);
    }
    expect(worst < 1e-3, name + " gradient");
    worst_line += fmt(" %s %.1e", name.c_str(), worst);
  }
  std::string failed;
  for (const auto& f : failures) failed += " [" + f + "]";
  return {failures.empty(), "examples and gradients; worst relative error:" + worst_line +
                                (failed.empty() ? "" : "; failed:" + failed)};
}

Verdict c4_phase_asymmetry(const Workspace&) {
  const Array2D<double> z(4, 4, 0.01), zh(4, 4, 0.99);
  const double sym = periodic_phase_loss(z, zh).value;
  const double lit = periodic_phase_loss(z, zh, PhaseLossVariant::PaperLiteral).value;
  return {std::abs(sym - 0.02) < 1e-12 && std::abs(lit - 0.98) < 1e-12,
          fmt("z=0.01, zhat=0.99: symmetric %.6f, literal %.6f", sym, lit)};
}

Verdict c5_network_gradients(const Workspace&) {
  UNetConfig c;
  c.base_channels = 4;
  c.stages = 1;
  c.in_size = 12;
  c.pad_to = 12;
  UNet<double> net(c);
  net.init(5);
  Rng rng(6);
  Tensor4<double> x(2, 1, 12, 12), w(2, 1, 12, 12);
  for (auto& v : x.data) v = rng.uniform(0.05, 0.95);
  for (auto& v : w.data) v = rng.normal();
  auto loss = [&](UNet<double>& n) {
    Tape<double> tape;
    const Tensor4<double> y = n.forward_train(x, tape);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * w.data[i];
    return s;
  };
  Tape<double> tape;
  net.forward_train(x, tape);
  const NetParams<double> g = net.backward(tape, w);

  // Every parameter; pooling, upsampling and concatenation are exercised
  // through the gradients of the layers before them.
  std::map<std::string, double> worst_by_kind;
  std::size_t checked = 0;
  for (std::size_t t = 0; t < net.params().tensors.size(); ++t) {
    auto& values = net.params().tensors[t].values;
    const std::string& name = net.params().tensors[t].name;
    const std::string kind = name.substr(name.find('.') + 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i], h = 1e-6;
      values[i] = keep + h;
      const double fp = loss(net);
      values[i] = keep - h;
      const double fm = loss(net);
      values[i] = keep;
      const double num = (fp - fm) / (2 * h), ana = g.tensors[t].values[i];
      const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
      worst_by_kind[kind] = std::max(worst_by_kind[kind], rel);
      ++checked;
    }
  }
  double worst = 0.0;
  std::string detail;
  for (const auto& [k, v] : worst_by_kind) {
    worst = std::max(worst, v);
    detail += fmt(" %s %.1e", k.c_str(), v);
  }
  return {worst < 1e-3, fmt("%zu parameters checked; worst relative error per tensor:", checked) + detail};
}

Verdict c6_training(const Workspace& ws) {
  bool pass = true;
  std::string detail;
  for (ChannelKind kind : {ChannelKind::Magnitude, ChannelKind::Phase}) {
    const Trained& t = trained(ws, 3, kind);
    const Dataset& ds = dataset(ws, 3);
    int wins = 0, n = 0;
    double net_sum = 0.0, bic_sum = 0.0;
    for (const DatasetEntry* e : ds.select(kind, false)) {
      const SamplePair p = ds.pair(*e);
      const auto truth = as_double(p.high);
      const auto net = as_double(restore_with(t.net, p.low));
      const auto bic = as_double(bicubic_upsample(p.low, p.high.rows()));
      const double ln = kind == ChannelKind::Magnitude ? mae(truth, net).value : periodic_phase_loss(truth, net).value;
      const double lb = kind == ChannelKind::Magnitude ? mae(truth, bic).value : periodic_phase_loss(truth, bic).value;
      wins += ln < lb;
      ++n;
      net_sum += ln;
      bic_sum += lb;
    }
    const bool a = t.final_val < 0.5 * t.initial_val;
    const bool b = wins >= 0.7 * n;
    pass = pass && a && b;
    detail += fmt("%s: val %.4f -> %.4f (%s), beats bicubic on %d/%d maps (%s; mean %.4f vs %.4f). ",
                  to_string(kind).c_str(), t.initial_val, t.final_val, a ? "ok" : "not halved", wins, n,
                  b ? "ok" : "below 70%", net_sum / n, bic_sum / n);
  }
  return {pass, detail};
}

std::vector<EvalRow> comparison_rows(const Workspace& ws) {
  static std::optional<std::vector<EvalRow>> rows;
  if (!rows) {
    StudyOptions so;
    so.methods = {Method::Identity, Method::NfsNet, Method::Bicubic, Method::Kriging, Method::Cs};
    so.factors = {3};
    so.nets_by_factor.emplace(3, nets(ws, 3));
    rows = run_comparison(held_out(ws), so);
  }
  return *rows;
}

Verdict c7_end_to_end(const Workspace& ws) {
  const auto rows = comparison_rows(ws);
  std::map<Method, MethodSummary> by;
  for (const auto& s : summarize(rows)) by[s.method] = s;
  const MethodSummary& net = by.at(Method::NfsNet);
  const double e_net = net.errors.mean, e_bic = by.at(Method::Bicubic).errors.mean,
               e_kri = by.at(Method::Kriging).errors.mean;
  const int n = net.scenes - net.failed;
  const bool pass = net.failed == 0 && e_net <= e_bic && e_net <= e_kri &&
                    net.within_3db_of_identity >= 0.7 * n;
  return {pass, fmt("mean pattern error over %d held-out scenes: nfsnet %.2f dB, bicubic %.2f, kriging %.2f, "
                    "cs %.2f, identity %.2f; nfsnet within 3 dB of identity on %d/%d",
                    n, e_net, e_bic, e_kri, by.at(Method::Cs).errors.mean,
                    by.at(Method::Identity).errors.mean, net.within_3db_of_identity, n)};
}

Verdict c8_factor_study(const Workspace& ws) {
  StudyOptions so;
  so.methods = {Method::NfsNet};
  so.factors = {2};
  so.nets_by_factor.emplace(2, nets(ws, 2));
  const auto f2 = summarize(run_comparison(held_out(ws), so));
  double e3 = 0.0;
  for (const auto& s : summarize(comparison_rows(ws)))
    if (s.method == Method::NfsNet) e3 = s.errors.mean;
  const double e2 = f2.front().errors.mean;
  return {f2.front().failed == 0 && e2 <= e3,
          fmt("nfsnet mean pattern error: factor 2 %.2f dB, factor 3 %.2f dB", e2, e3)};
}

Verdict c9_snr(const Workspace& ws) {
  StudyOptions so;
  so.snr_method = Method::NfsNet;
  so.snr_list = {10, 15, 20, 25, 30, 40, 300};
  so.seed = 99;
  so.nets_by_factor.emplace(3, nets(ws, 3));
  const auto rows = run_snr(held_out(ws), so);
  std::map<double, double> err;
  std::string curve;
  for (const auto& r : rows) {
    err[r.snr_db] = r.mean_error;
    curve += fmt(" %g:%.2f", r.snr_db, r.mean_error);
  }
  const bool pass = err.at(10) >= err.at(30) && err.at(30) >= err.at(300);
  return {pass, fmt("mean error (dB) by SNR:%s; identity %.2f", curve.c_str(), rows.front().mean_identity)};
}

Verdict c10_determinism(const Workspace& ws) {
  const fs::path root = ws.dir / "determinism";
  fs::remove_all(root);
  auto cli = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) throw std::runtime_error("nfsr " + args.front() + " failed: " + err.str());
  };
  std::vector<std::string> mismatched;
  auto same = [&](const fs::path& a, const fs::path& b) {
    if (!fs::exists(a) || slurp(a) != slurp(b)) mismatched.push_back(a.lexically_relative(root / "a").string());
  };
  // Both runs write to the same paths (reports record their inputs), then move aside.
  for (const std::string run : {"a", "b"}) {
    const fs::path d = root / "run";
    cli({"synth", "--scenes", "5", "--seed", "31", "--grid", "48", "--split", "0.6", "--out", (d / "data").string()});
    for (const std::string ch : {"mag", "phase"})
      cli({"train", "--data", (d / "data").string(), "--channel", ch, "--preset", "toy", "--epochs", "2",
           "--decay-every", "1", "--base-channels", "4", "--stages", "2", "--seed", "3", "--out",
           (d / ("net_" + ch)).string()});
    cli({"eval", "--data", (d / "data").string(), "--study", "compare", "--methods", "identity,nfsnet,bicubic",
         "--mag-params", (d / "net_mag").string(), "--phase-params", (d / "net_phase").string(), "--out",
         (d / "report").string()});
    fs::rename(d, root / run);
  }
  const fs::path a = root / "a", b = root / "b";
  for (const auto& f : {"data/manifest.json", "data/arrays.bin", "net_mag/manifest.json", "net_mag/arrays.bin",
                        "net_mag/loss.csv", "net_phase/arrays.bin", "net_phase/loss.csv",
                        "report/compare.csv", "report/compare_summary.csv", "report/report.json"})
    same(a / f, b / f);
  std::string list;
  for (const auto& m : mismatched) list += " " + m;
  return {mismatched.empty(), mismatched.empty() ? "synth, train and eval outputs bit-identical across two runs"
                                                 : "differing files:" + list};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Verdict(const Workspace&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  Workspace ws;
  ws.dir = fs::current_path() / "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) ws.dir = argv[++i];
    else if (a == "--reuse") ws.reuse = true;
    else only.insert(std::stoi(a));
  }
  fs::create_directories(ws.dir);

  const std::vector<Criterion> criteria{
      {1, "NF2FF oracle", 60, c1_nf2ff_oracle},
      {2, "Parseval and sign convention", 10, c2_parseval_sign},
      {3, "loss-function suite", 30, c3_losses},
      {4, "periodic-phase asymmetry", 1, c4_phase_asymmetry},
      {5, "network gradient audit", 120, c5_network_gradients},
      {6, "toy training efficacy", 1800, c6_training},
      {7, "end-to-end pipeline vs baselines", 600, c7_end_to_end},
      {8, "factor study", 600, c8_factor_study},
      {9, "SNR sweep", 600, c9_snr},
      {10, "determinism", 0, c10_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::fprintf(stderr, "criterion %d: %s\n", c.id, c.name.c_str());
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(ws);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string timing = c.budget_s > 0 ? fmt("%.1f s, target %.0f s%s", s, c.budget_s,
                                                    s > c.budget_s ? ", over target" : "")
                                              : fmt("%.1f s", s);
    std::printf("%s [%d] %s: %s (%s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), v.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
