#include "nfsr/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "nfsr/error.hpp"
#include "nfsr/rng.hpp"

namespace nfsr {

using std::numbers::pi;
namespace fs = std::filesystem;

std::string to_string(ChannelKind k) { return k == ChannelKind::Magnitude ? "magnitude" : "phase"; }
std::string to_string(FieldComponent c) { return c == FieldComponent::Ex ? "ex" : "ey"; }

ChannelKind parse_channel_kind(const std::string& s) {
  if (s == "magnitude" || s == "mag") return ChannelKind::Magnitude;
  if (s == "phase") return ChannelKind::Phase;
  throw ConfigError("unknown channel kind '" + s + "' (expected mag|phase)");
}

void ChannelMap::validate() const {
  for (float v : values)
    if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("channel map value outside [0, 1]");
  if (kind == ChannelKind::Magnitude && !(denorm.scale > 0.0))
    throw ConfigError("magnitude channel needs a positive denormalization scale");
}

double wrap_phase(double radians) {
  double w = std::fmod(radians + pi, 2.0 * pi);
  if (w < 0.0) w += 2.0 * pi;
  w -= pi;
  return w >= pi ? -pi : w;
}

double encode_phase(double radians) { return (radians + pi) / (2.0 * pi); }
double decode_phase(double unit) { return unit * 2.0 * pi - pi; }

ChannelMap normalize(const Array2D<double>& raw, ChannelKind kind) {
  ChannelMap out;
  out.kind = kind;
  out.values = Array2D<float>(raw.rows(), raw.cols());
  if (raw.empty()) throw ConfigError("cannot normalize an empty map");
  if (kind == ChannelKind::Magnitude) {
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    for (double v : raw)
      if (!std::isfinite(v) || v < 0.0) throw DomainError("magnitude must be finite and non-negative");
    if (!(hi > lo)) throw NumericError("degenerate normalization: constant magnitude map");
    out.denorm = {lo, hi - lo};
    std::transform(raw.begin(), raw.end(), out.values.begin(), [&](double v) {
      return static_cast<float>(std::clamp((v - lo) / (hi - lo), 0.0, 1.0));
    });
  } else {
    for (double v : raw)
      if (!(v >= -pi && v < pi)) throw DomainError("phase must lie in [-pi, pi)");
    out.denorm = {};
    std::transform(raw.begin(), raw.end(), out.values.begin(),
                   [](double v) { return static_cast<float>(encode_phase(v)); });
  }
  return out;
}

Array2D<double> denormalize(const ChannelMap& map) {
  Array2D<double> out(map.rows(), map.cols());
  if (map.kind == ChannelKind::Magnitude) {
    std::transform(map.values.begin(), map.values.end(), out.begin(), [&](float v) {
      return map.denorm.offset + map.denorm.scale * static_cast<double>(v);
    });
  } else {
    std::transform(map.values.begin(), map.values.end(), out.begin(),
                   [](float v) { return wrap_phase(decode_phase(static_cast<double>(v))); });
  }
  return out;
}

std::size_t downsampled_size(std::size_t n, int factor) {
  return (n + static_cast<std::size_t>(factor) - 1) / static_cast<std::size_t>(factor);
}

ChannelMap downsample(const ChannelMap& high, int factor) {
  if (factor != 2 && factor != 3)
    throw ConfigError("unsupported downsampling factor " + std::to_string(factor) +
                      " (supported: 2, 3)");
  ChannelMap low;
  low.kind = high.kind;
  low.denorm = high.denorm;
  const std::size_t f = static_cast<std::size_t>(factor);
  low.values = Array2D<float>(downsampled_size(high.rows(), factor),
                              downsampled_size(high.cols(), factor));
  for (std::size_t r = 0; r < low.rows(); ++r)
    for (std::size_t c = 0; c < low.cols(); ++c) low.values(r, c) = high.values(f * r, f * c);
  return low;
}

ChannelMap rot90(const ChannelMap& map) {
  if (map.rows() != map.cols()) throw ConfigError("rotation augmentation needs a square map");
  const std::size_t n = map.rows();
  ChannelMap out = map;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) out.values(r, c) = map.values(c, n - 1 - r);
  return out;
}

std::array<ChannelMap, 4> augment_rotations(const ChannelMap& map) {
  std::array<ChannelMap, 4> out;
  out[0] = map;
  out[1] = rot90(out[0]);
  out[2] = rot90(out[1]);
  out[3] = rot90(out[2]);
  return out;
}

Array2D<double> magnitude_of(const ComplexMap& field) {
  Array2D<double> out(field.rows(), field.cols());
  std::transform(field.begin(), field.end(), out.begin(), [](const cd& v) { return std::abs(v); });
  return out;
}

Array2D<double> phase_of(const ComplexMap& field) {
  Array2D<double> out(field.rows(), field.cols());
  std::transform(field.begin(), field.end(), out.begin(),
                 [](const cd& v) { return wrap_phase(std::arg(v)); });
  return out;
}

ComplexMap from_polar(const Array2D<double>& magnitude, const Array2D<double>& phase) {
  if (!magnitude.same_shape(phase)) throw ConfigError("magnitude/phase shape mismatch");
  ComplexMap out(magnitude.rows(), magnitude.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.storage()[i] = std::polar(magnitude.storage()[i], phase.storage()[i]);
  return out;
}

FieldMap add_noise(const FieldMap& map, double snr_db, std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw ConfigError("SNR must be finite");
  map.validate();
  double power = 0.0;
  for (const auto& v : map.ex) power += std::norm(v);
  for (const auto& v : map.ey) power += std::norm(v);
  power /= static_cast<double>(map.ex.size() + map.ey.size());
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0) / 2.0);

  Rng rng(seed);
  FieldMap out = map;
  for (auto* comp : {&out.ex, &out.ey})
    for (auto& v : *comp) {
      const double re = rng.normal();
      const double im = rng.normal();
      v += cd(sigma * re, sigma * im);
    }
  return out;
}

double realized_snr_db(const FieldMap& clean, const FieldMap& noisy) {
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < clean.ex.size(); ++i) {
    signal += std::norm(clean.ex.storage()[i]) + std::norm(clean.ey.storage()[i]);
    noise += std::norm(noisy.ex.storage()[i] - clean.ex.storage()[i]) +
             std::norm(noisy.ey.storage()[i] - clean.ey.storage()[i]);
  }
  return 10.0 * std::log10(signal / noise);
}

// ---------------------------------------------------------------- dataset

void DatasetConfig::validate() const {
  if (n_scenes < 1) throw ConfigError("n_scenes must be >= 1");
  if (grid_n < 2) throw ConfigError("grid_n must be >= 2");
  if (!(spacing_lambda > 0.0) || spacing_lambda > 0.5)
    throw ConfigError("spacing_lambda must lie in (0, 0.5] for a fully-sampled grid");
  if (!(zd_lambda > 0.0)) throw ConfigError("zd_lambda must be positive");
  if (!(freq_min_hz > 0.0) || freq_max_hz < freq_min_hz)
    throw ConfigError("invalid frequency range");
  if (profiles.empty()) throw ConfigError("at least one scene profile is required");
  if (!(split_ratio > 0.0 && split_ratio <= 1.0)) throw ConfigError("split_ratio must be in (0, 1]");
  if (factor != 2 && factor != 3) throw ConfigError("factor must be 2 or 3");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::vector<SceneRecord> plan_scenes(const DatasetConfig& config) {
  config.validate();
  std::vector<SceneRecord> scenes(config.n_scenes);
  for (int i = 0; i < config.n_scenes; ++i) {
    auto& s = scenes[i];
    s.index = i;
    s.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    s.profile = config.profiles[static_cast<std::size_t>(i) % config.profiles.size()];
    Rng freq_rng(derive_seed(s.seed, 0xF4EE));
    s.freq_hz = freq_rng.uniform(config.freq_min_hz, config.freq_max_hz);
  }
  // Split by scene so that no rotation of a training scene leaks into the test split.
  std::vector<int> order(config.n_scenes);
  for (int i = 0; i < config.n_scenes; ++i) order[i] = i;
  Rng split_rng(derive_seed(config.seed, 0x5B117));
  for (int i = config.n_scenes - 1; i > 0; --i)
    std::swap(order[i], order[split_rng.uniform_int(0, i)]);
  const int n_train = static_cast<int>(std::lround(config.split_ratio * config.n_scenes));
  for (int i = 0; i < config.n_scenes; ++i) scenes[order[i]].train = i < n_train;
  return scenes;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["seed"] = seed;
  j["split"] = {{"ratio", split_ratio}, {"train", train_scenes}, {"test", test_scenes}};
  j["factor"] = factor;
  j["grid"] = {{"n", grid_n}, {"spacing_lambda", spacing_lambda}, {"zd_lambda", zd_lambda}};
  auto& sc = j["scenes"] = nlohmann::json::array();
  for (const auto& s : scenes)
    sc.push_back({{"index", s.index}, {"seed", s.seed}, {"profile", to_string(s.profile)},
                  {"freq_hz", s.freq_hz}, {"train", s.train}});
  auto& en = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries)
    en.push_back({{"id", e.id},
                  {"scene", e.meta.scene},
                  {"scene_seed", e.meta.scene_seed},
                  {"freq_hz", e.meta.freq_hz},
                  {"z_d", e.meta.z_d},
                  {"channel", to_string(e.meta.channel)},
                  {"kind", to_string(e.meta.kind)},
                  {"rotation", e.meta.rotation},
                  {"denorm", {{"offset", e.denorm.offset}, {"scale", e.denorm.scale}}},
                  {"low", e.low.to_json()},
                  {"high", e.high.to_json()}});
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split_ratio = j.at("split").at("ratio").get<double>();
    m.train_scenes = j.at("split").at("train").get<std::vector<int>>();
    m.test_scenes = j.at("split").at("test").get<std::vector<int>>();
    m.factor = j.at("factor").get<int>();
    m.grid_n = j.at("grid").at("n").get<int>();
    m.spacing_lambda = j.at("grid").at("spacing_lambda").get<double>();
    m.zd_lambda = j.at("grid").at("zd_lambda").get<double>();
    for (const auto& s : j.at("scenes")) {
      SceneRecord r;
      r.index = s.at("index").get<int>();
      r.seed = s.at("seed").get<std::uint64_t>();
      r.profile = parse_scene_profile(s.at("profile").get<std::string>());
      r.freq_hz = s.at("freq_hz").get<double>();
      r.train = s.at("train").get<bool>();
      m.scenes.push_back(r);
    }
    for (const auto& e : j.at("entries")) {
      DatasetEntry d;
      d.id = e.at("id").get<int>();
      d.meta.scene = e.at("scene").get<int>();
      d.meta.scene_seed = e.at("scene_seed").get<std::uint64_t>();
      d.meta.freq_hz = e.at("freq_hz").get<double>();
      d.meta.z_d = e.at("z_d").get<double>();
      d.meta.channel = e.at("channel").get<std::string>() == "ex" ? FieldComponent::Ex
                                                                  : FieldComponent::Ey;
      d.meta.kind = parse_channel_kind(e.at("kind").get<std::string>());
      d.meta.rotation = e.at("rotation").get<int>();
      d.denorm = {e.at("denorm").at("offset").get<double>(), e.at("denorm").at("scale").get<double>()};
      d.low = ArrayRef::from_json(e.at("low"));
      d.high = ArrayRef::from_json(e.at("high"));
      m.entries.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dataset manifest: ") + e.what());
  }
  return m;
}

namespace {

std::vector<SamplePair> scene_samples(const SceneRecord& rec, const GridSpec& grid, int factor) {
  const FieldMap field = synthesize_nearfield(rec.scene(), grid);
  std::vector<SamplePair> out;
  for (FieldComponent comp : {FieldComponent::Ex, FieldComponent::Ey}) {
    const ComplexMap& e = comp == FieldComponent::Ex ? field.ex : field.ey;
    for (ChannelKind kind : {ChannelKind::Magnitude, ChannelKind::Phase}) {
      const ChannelMap base =
          normalize(kind == ChannelKind::Magnitude ? magnitude_of(e) : phase_of(e), kind);
      const auto rotations = augment_rotations(base);
      for (int r = 0; r < 4; ++r) {
        SamplePair p;
        p.high = rotations[r];
        p.low = downsample(p.high, factor);
        p.meta = {grid.freq_hz, grid.z_d, rec.seed, rec.index, comp, kind, r};
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

}  // namespace

DatasetManifest build_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  DatasetManifest m;
  m.seed = config.seed;
  m.split_ratio = config.split_ratio;
  m.factor = config.factor;
  m.grid_n = config.grid_n;
  m.spacing_lambda = config.spacing_lambda;
  m.zd_lambda = config.zd_lambda;
  m.scenes = plan_scenes(config);
  for (const auto& s : m.scenes) (s.train ? m.train_scenes : m.test_scenes).push_back(s.index);

  // Scenes synthesize in parallel into fixed slots; the bundle writer consumes them in order.
  std::vector<std::vector<SamplePair>> per_scene(m.scenes.size());
  std::vector<std::string> failures(m.scenes.size());
  {
    const int nthreads = std::min<int>(config.threads, static_cast<int>(m.scenes.size()));
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < m.scenes.size();
             i += static_cast<std::size_t>(nthreads)) {
          try {
            per_scene[i] = scene_samples(m.scenes[i], m.grid_for(m.scenes[i]), config.factor);
          } catch (const std::exception& e) {
            failures[i] = e.what();
          }
        }
      });
  }
  for (std::size_t i = 0; i < failures.size(); ++i)
    if (!failures[i].empty())
      throw NumericError("scene " + std::to_string(i) + ": " + failures[i]);

  BundleWriter writer(out_dir, "dataset");
  int id = 0;
  for (auto& samples : per_scene) {
    for (auto& p : samples) {
      DatasetEntry e;
      e.id = id++;
      e.meta = p.meta;
      e.denorm = p.high.denorm;
      e.low = writer.append(p.low.values.values(), {p.low.rows(), p.low.cols()});
      e.high = writer.append(p.high.values.values(), {p.high.rows(), p.high.cols()});
      m.entries.push_back(std::move(e));
    }
    samples.clear();
  }
  const nlohmann::json body = m.to_json();
  for (auto it = body.begin(); it != body.end(); ++it) writer.manifest()[it.key()] = it.value();
  writer.finish();
  return m;
}

Dataset::Dataset(const fs::path& dir)
    : reader_(dir, "dataset"), manifest_(DatasetManifest::from_json(reader_.manifest())) {}

SamplePair Dataset::pair(const DatasetEntry& entry) const {
  auto load = [&](const ArrayRef& ref) {
    if (ref.shape.size() != 2) throw IoError("dataset array is not two-dimensional");
    ChannelMap c;
    c.kind = entry.meta.kind;
    c.denorm = entry.denorm;
    c.values = Array2D<float>(ref.shape[0], ref.shape[1]);
    c.values.storage() = reader_.read(ref);
    return c;
  };
  return {load(entry.low), load(entry.high), entry.meta};
}

std::vector<const DatasetEntry*> Dataset::select(ChannelKind kind, bool train) const {
  std::vector<bool> is_train(manifest_.scenes.size(), false);
  for (const auto& s : manifest_.scenes) is_train.at(static_cast<std::size_t>(s.index)) = s.train;
  std::vector<const DatasetEntry*> out;
  for (const auto& e : manifest_.entries)
    if (e.meta.kind == kind && is_train.at(static_cast<std::size_t>(e.meta.scene)) == train)
      out.push_back(&e);
  return out;
}

nlohmann::json to_json(const AntennaScene& scene) {
  nlohmann::json j;
  j["freq_hz"] = scene.freq_hz;
  auto& src = j["sources"] = nlohmann::json::array();
  for (const DipoleSource& d : scene.sources)
    src.push_back({{"position", {d.position.x(), d.position.y(), d.position.z()}},
                   {"orientation", {d.orientation.x(), d.orientation.y(), d.orientation.z()}},
                   {"amplitude", {d.amplitude.real(), d.amplitude.imag()}}});
  return j;
}

AntennaScene scene_from_json(const nlohmann::json& j) {
  AntennaScene s;
  s.freq_hz = j.at("freq_hz").get<double>();
  for (const auto& d : j.at("sources")) {
    const auto p = d.at("position").get<std::array<double, 3>>();
    const auto o = d.at("orientation").get<std::array<double, 3>>();
    const auto a = d.at("amplitude").get<std::array<double, 2>>();
    s.sources.push_back({{p[0], p[1], p[2]}, {o[0], o[1], o[2]}, {a[0], a[1]}});
  }
  return s;
}

nlohmann::json to_json(const GridSpec& g) {
  return {{"nx", g.nx}, {"ny", g.ny}, {"dx", g.dx}, {"dy", g.dy}, {"z_d", g.z_d},
          {"freq_hz", g.freq_hz}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  g.z_d = j.at("z_d").get<double>();
  g.freq_hz = j.at("freq_hz").get<double>();
  return g;
}

void save_field_map(const FieldMap& map, const fs::path& dir, const AntennaScene* scene) {
  map.validate();
  BundleWriter w(dir, "fieldmap");
  const std::vector<std::uint64_t> shape{map.ex.rows(), map.ex.cols()};
  auto& arrays = w.manifest()["arrays"] = nlohmann::json::object();
  const std::pair<const char*, const ComplexMap*> comps[] = {{"ex", &map.ex}, {"ey", &map.ey}};
  std::vector<float> buf(map.ex.size());
  for (const auto& [name, field] : comps) {
    for (int part = 0; part < 2; ++part) {
      for (std::size_t q = 0; q < buf.size(); ++q) {
        const cd v = field->storage()[q];
        buf[q] = static_cast<float>(part == 0 ? v.real() : v.imag());
      }
      arrays[std::string(name) + (part == 0 ? "_re" : "_im")] = w.append(buf, shape).to_json();
    }
  }
  w.manifest()["grid"] = to_json(map.grid);
  if (scene) w.manifest()["scene"] = to_json(*scene);
  w.finish();
}

FieldMapFile load_field_map(const fs::path& dir) {
  const BundleReader r(dir, "fieldmap");
  FieldMapFile out;
  try {
    const auto& m = r.manifest();
    out.map.grid = grid_from_json(m.at("grid"));
    const auto rows = static_cast<std::size_t>(out.map.grid.ny);
    const auto cols = static_cast<std::size_t>(out.map.grid.nx);
    auto component = [&](const char* name) {
      const auto re = r.read(ArrayRef::from_json(m.at("arrays").at(std::string(name) + "_re")));
      const auto im = r.read(ArrayRef::from_json(m.at("arrays").at(std::string(name) + "_im")));
      if (re.size() != rows * cols || im.size() != rows * cols)
        throw IoError(dir.string() + ": array '" + name + "' does not match the grid");
      ComplexMap f(rows, cols);
      for (std::size_t q = 0; q < f.size(); ++q) f.storage()[q] = cd(re[q], im[q]);
      return f;
    };
    out.map.ex = component("ex");
    out.map.ey = component("ey");
    if (m.contains("scene")) out.scene = scene_from_json(m.at("scene"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + ": malformed field map manifest (" + e.what() + ")");
  }
  try {
    out.map.validate();
  } catch (const ConfigError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return out;
}

}  // namespace nfsr
