#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "nfsr/dataio.hpp"
#include "nfsr/error.hpp"
#include "nfsr/rng.hpp"

using namespace nfsr;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nfsr_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ChannelMap ramp(std::size_t n) {
  ChannelMap m;
  m.values = Array2D<float>(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m.values(r, c) = static_cast<float>(r * n + c) / (n * n);
  return m;
}

}  // namespace

TEST_CASE("normalize: magnitude and phase examples") {
  Array2D<double> raw(1, 3);
  raw(0, 0) = 0.0, raw(0, 1) = 5.0, raw(0, 2) = 10.0;
  const ChannelMap m = normalize(raw, ChannelKind::Magnitude);
  CHECK(m.values(0, 0) == 0.0f);
  CHECK(m.values(0, 1) == 0.5f);
  CHECK(m.values(0, 2) == 1.0f);
  CHECK(m.denorm == Denorm{0.0, 10.0});

  CHECK(encode_phase(-pi) == 0.0);
  CHECK(encode_phase(0.0) == 0.5);
  CHECK_THROWS_WITH_AS(normalize(Array2D<double>(2, 2, 3.0), ChannelKind::Magnitude),
                       doctest::Contains("degenerate normalization"), NumericError);
  CHECK_THROWS_AS(normalize(Array2D<double>(2, 2, pi), ChannelKind::Phase), DomainError);
}

TEST_CASE("normalize round trip and phase codec") {
  Rng rng(1);
  Array2D<double> raw(20, 20);
  for (auto& v : raw) v = rng.uniform(0.0, 3.0);
  const Array2D<double> back = denormalize(normalize(raw, ChannelKind::Magnitude));
  for (std::size_t i = 0; i < raw.size(); ++i)
    CHECK(std::abs(back.storage()[i] - raw.storage()[i]) < 1e-6);

  for (int t = 0; t < 1000; ++t) {
    const double v = rng.uniform(-pi, pi);
    CHECK(std::abs(decode_phase(encode_phase(v)) - v) < 1e-9);
  }
  CHECK(wrap_phase(pi) == doctest::Approx(-pi));
  CHECK(wrap_phase(3 * pi + 0.1) == doctest::Approx(-pi + 0.1));
}

TEST_CASE("downsample sizes and pure index selection") {
  const ChannelMap high = ramp(86);
  const ChannelMap a = downsample(high, 3), b = downsample(high, 2);
  CHECK(a.rows() == 29);
  CHECK(b.rows() == 43);
  CHECK(downsampled_size(86, 3) == 29);
  CHECK(29.0 * 29.0 / (86.0 * 86.0) == doctest::Approx(0.114).epsilon(0.01));
  for (std::size_t i = 0; i < 29; ++i)
    for (std::size_t j = 0; j < 29; ++j) CHECK(a.values(i, j) == high.values(3 * i, 3 * j));
  CHECK_THROWS_AS(downsample(high, 1), ConfigError);
  CHECK_THROWS_AS(downsample(high, 4), ConfigError);
}

TEST_CASE("rotations form a group of exact permutations") {
  const ChannelMap m = ramp(7);
  const auto rots = augment_rotations(m);
  CHECK(rots[0].values == m.values);
  CHECK(rots[2].values == rot90(rot90(m)).values);
  CHECK(rot90(rot90(rot90(rot90(m)))).values == m.values);
  CHECK(rots[1].values(0, 0) == m.values(0, 6));
  ChannelMap wide;
  wide.values = Array2D<float>(3, 4);
  CHECK_THROWS_AS(augment_rotations(wide), ConfigError);
}

TEST_CASE("noise: vanishing, realized SNR and determinism") {
  const AntennaScene scene = random_scene(11, SceneProfile::PlanarArray, 3e9);
  const FieldMap clean = synthesize_nearfield(scene, GridSpec::square(86, 3e9));
  const FieldMap quiet = add_noise(clean, 300.0, 1);
  for (std::size_t q = 0; q < clean.ex.size(); ++q)
    CHECK(std::abs(quiet.ex.storage()[q] - clean.ex.storage()[q]) <=
          1e-9 * std::abs(clean.ex.storage()[q]) + 1e-300);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double s = realized_snr_db(clean, add_noise(clean, 20.0, seed));
    CHECK(s >= 19.5);
    CHECK(s <= 20.5);
  }
  const FieldMap a = add_noise(clean, 10.0, 7), b = add_noise(clean, 10.0, 7);
  CHECK(a.ex == b.ex);
  CHECK(a.ey == b.ey);
  CHECK_THROWS_AS(add_noise(clean, std::nan(""), 1), ConfigError);
}

TEST_CASE("dataset: counts, split without leakage, determinism") {
  DatasetConfig cfg;
  cfg.n_scenes = 10;
  cfg.grid_n = 24;
  cfg.seed = 5;
  const fs::path a = scratch("ds_a"), b = scratch("ds_b");
  const DatasetManifest m = build_dataset(cfg, a);
  CHECK(m.entries.size() == 160);
  CHECK(m.train_scenes.size() == 8);
  CHECK(m.test_scenes.size() == 2);
  const std::set<int> test(m.test_scenes.begin(), m.test_scenes.end());
  for (int s : m.train_scenes) CHECK(test.count(s) == 0);

  const Dataset ds(a);
  for (auto kind : {ChannelKind::Magnitude, ChannelKind::Phase}) {
    for (const auto* e : ds.select(kind, false)) CHECK(test.count(e->meta.scene) == 1);
    for (const auto* e : ds.select(kind, true)) CHECK(test.count(e->meta.scene) == 0);
    CHECK(ds.select(kind, true).size() == 64);
  }
  const SamplePair p = ds.pair(m.entries.front());
  CHECK(p.high.rows() == 24);
  CHECK(p.low.rows() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(p.low.values(i, i) == p.high.values(3 * i, 3 * i));

  cfg.threads = 2;
  build_dataset(cfg, b);
  CHECK(slurp(a / "arrays.bin") == slurp(b / "arrays.bin"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

  cfg.n_scenes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(Dataset(scratch("missing")), IoError);
}

TEST_CASE("field map bundle round trip") {
  const AntennaScene scene = random_scene(3, SceneProfile::RandomCluster, 2.5e9);
  const GridSpec grid = GridSpec::square(20, 2.5e9);
  const FieldMap map = synthesize_nearfield(scene, grid);
  const fs::path dir = scratch("fieldmap");
  save_field_map(map, dir, &scene);
  const FieldMapFile back = load_field_map(dir);
  CHECK(back.scene.has_value());
  CHECK(*back.scene == scene);
  CHECK(back.map.grid.nx == 20);
  CHECK(back.map.grid.dx == grid.dx);
  // Stored as 32-bit floats.
  for (std::size_t q = 0; q < map.ex.size(); ++q)
    CHECK(std::abs(back.map.ex.storage()[q] - map.ex.storage()[q]) <=
          1e-6 * std::abs(map.ex.storage()[q]) + 1e-30);

  const fs::path bare = scratch("fieldmap_bare");
  save_field_map(map, bare);
  CHECK_FALSE(load_field_map(bare).scene.has_value());

  std::ofstream(dir / "manifest.json") << "{ not json";
  CHECK_THROWS_AS(load_field_map(dir), IoError);
}
