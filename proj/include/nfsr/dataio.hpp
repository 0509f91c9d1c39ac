#pragma once

// Dataset construction: per-map [0,1] normalization, 90-degree rotation
// augmentation, uniform decimation into low/high pairs, noise injection and
// persistence in the bundle format.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfsr/array2d.hpp"
#include "nfsr/bundle.hpp"
#include "nfsr/fieldsynth.hpp"

namespace nfsr {

enum class ChannelKind { Magnitude, Phase };
enum class FieldComponent { Ex, Ey };

std::string to_string(ChannelKind k);
std::string to_string(FieldComponent c);
ChannelKind parse_channel_kind(const std::string& s);

// value = offset + scale * normalized (magnitude maps only).
struct Denorm {
  double offset = 0.0;
  double scale = 1.0;
  bool operator==(const Denorm&) const = default;
};

struct ChannelMap {
  Array2D<float> values;  // in [0, 1]
  ChannelKind kind = ChannelKind::Magnitude;
  Denorm denorm;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  void validate() const;
};

// Wrapped phase [-pi, pi) <-> [0, 1).
double encode_phase(double radians);
double decode_phase(double unit);
// Wraps any angle into [-pi, pi).
double wrap_phase(double radians);

// Magnitude: min-max scaling (throws NumericError("degenerate normalization") on
// constant input). Phase: (v + pi) / (2 pi), input must lie in [-pi, pi).
ChannelMap normalize(const Array2D<double>& raw, ChannelKind kind);
Array2D<double> denormalize(const ChannelMap& map);

// Keeps indices 0, f, 2f, ... along both axes; factor must be 2 or 3.
ChannelMap downsample(const ChannelMap& high, int factor);
std::size_t downsampled_size(std::size_t n, int factor);

// Counter-clockwise quarter turn: out(r, c) = in(c, n - 1 - r).
ChannelMap rot90(const ChannelMap& map);
// [original, rot90, rot180, rot270]; square maps only.
std::array<ChannelMap, 4> augment_rotations(const ChannelMap& map);

Array2D<double> magnitude_of(const ComplexMap& field);
Array2D<double> phase_of(const ComplexMap& field);  // wrapped into [-pi, pi)
ComplexMap from_polar(const Array2D<double>& magnitude, const Array2D<double>& phase);

// Circular complex Gaussian noise on ex and ey with per-sample power
// mean(|ex|^2 + |ey|^2) / 2 / 10^(snr_db / 10).
FieldMap add_noise(const FieldMap& map, double snr_db, std::uint64_t seed);
// 10 log10(signal power / noise power) for a noisy copy of `clean`.
double realized_snr_db(const FieldMap& clean, const FieldMap& noisy);

struct SampleMeta {
  double freq_hz = 0.0;
  double z_d = 0.0;
  std::uint64_t scene_seed = 0;
  int scene = 0;
  FieldComponent channel = FieldComponent::Ex;
  ChannelKind kind = ChannelKind::Magnitude;
  int rotation = 0;  // quarter turns
};

struct SamplePair {
  ChannelMap low;
  ChannelMap high;
  SampleMeta meta;
};

struct DatasetConfig {
  int n_scenes = 100;
  int grid_n = 86;
  double spacing_lambda = 0.5;
  double zd_lambda = 4.0;
  double freq_min_hz = 1.0e9;
  double freq_max_hz = 10.0e9;
  std::vector<SceneProfile> profiles{SceneProfile::Single, SceneProfile::LinearArray,
                                     SceneProfile::PlanarArray, SceneProfile::RandomCluster};
  double split_ratio = 0.8;
  int factor = 3;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct SceneRecord {
  int index = 0;
  std::uint64_t seed = 0;
  SceneProfile profile = SceneProfile::Single;
  double freq_hz = 0.0;
  bool train = true;

  AntennaScene scene() const { return random_scene(seed, profile, freq_hz); }
};

struct DatasetEntry {
  int id = 0;
  SampleMeta meta;
  Denorm denorm;
  ArrayRef low;
  ArrayRef high;
};

struct DatasetManifest {
  int version = kBundleVersion;
  std::uint64_t seed = 0;
  double split_ratio = 0.8;
  int factor = 3;
  int grid_n = 86;
  double spacing_lambda = 0.5;
  double zd_lambda = 4.0;
  std::vector<SceneRecord> scenes;
  std::vector<int> train_scenes;
  std::vector<int> test_scenes;
  std::vector<DatasetEntry> entries;

  GridSpec grid_for(const SceneRecord& s) const {
    return GridSpec::square(grid_n, s.freq_hz, spacing_lambda, zd_lambda);
  }
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

// Scene list and split for a configuration, without synthesizing any field.
std::vector<SceneRecord> plan_scenes(const DatasetConfig& config);

// Builds and writes the dataset bundle under `out_dir`; deterministic in config.seed.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

// Single field map in the bundle format (kind "fieldmap"): ex/ey real and
// imaginary parts as four [ny][nx] arrays, the grid and optionally the scene
// that produced it.
struct FieldMapFile {
  FieldMap map;
  std::optional<AntennaScene> scene;
};

nlohmann::json to_json(const AntennaScene& scene);
AntennaScene scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);

void save_field_map(const FieldMap& map, const std::filesystem::path& dir,
                    const AntennaScene* scene = nullptr);
FieldMapFile load_field_map(const std::filesystem::path& dir);

// Read access to a dataset bundle.
class Dataset {
 public:
  explicit Dataset(const std::filesystem::path& dir);

  const DatasetManifest& manifest() const { return manifest_; }
  SamplePair pair(const DatasetEntry& entry) const;
  // Entries of one channel kind belonging to train (true) or test (false) scenes.
  std::vector<const DatasetEntry*> select(ChannelKind kind, bool train) const;

 private:
  BundleReader reader_;
  DatasetManifest manifest_;
};

}  // namespace nfsr
