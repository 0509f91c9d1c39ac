#pragma once

// Mini-batch Adam training of one network per channel kind.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "json.hpp"
#include "nfsr/dataio.hpp"
#include "nfsr/error.hpp"
#include "nfsr/losses.hpp"
#include "nfsr/unet.hpp"

namespace nfsr {

struct TrainConfig {
  int batch_size = 15;
  double lr0 = 1e-3;
  double lr_decay_factor = 10.0;
  int decay_every = 50;
  int total_epochs = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;

  // 200 epochs / decay every 50 (magnitude), 300 / 75 (phase).
  static TrainConfig paper(ChannelKind kind);
  // 30 epochs / decay every 20, for quick runs.
  static TrainConfig toy(ChannelKind kind);
};

struct LossOptions {
  LossWeights weights;
  MsSsimConfig msssim;
  PhaseLossVariant variant = PhaseLossVariant::Symmetric;
};

// lr0 / decay_factor^floor(epoch / decay_every)
double lr_schedule(const TrainConfig& config, int epoch);

template <class T>
struct AdamState {
  NetParams<T> m;
  NetParams<T> v;
  long step = 0;

  static AdamState zeros_like(const NetParams<T>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

// One bias-corrected Adam update; increments state.step first.
template <class T>
void adam_step(NetParams<T>& params, const NetParams<T>& grads, AdamState<T>& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  UNet<float> net;
  double initial_val_loss = 0.0;  // untrained network on the validation split
  std::vector<EpochRecord> history;
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
      : NumericError(what), history_(std::move(history)) {}
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  std::vector<EpochRecord> history_;
};

// Network input (pre-upsampled) and target for one map.
struct TrainingSample {
  Array2D<float> input;
  Array2D<float> target;
};

std::vector<TrainingSample> load_samples(const Dataset& data, ChannelKind kind, bool train,
                                         int in_size);

// Mean channel loss of the network in evaluation mode.
double evaluate_loss(const UNet<float>& net, const std::vector<TrainingSample>& samples,
                     ChannelKind kind, const LossOptions& loss = {}, int batch_size = 15);

// Trains on the dataset's training scenes and validates on its test scenes.
// Deterministic in config.seed.
TrainResult train(const Dataset& data, ChannelKind kind, const TrainConfig& config,
                  const UNetConfig& unet, const LossOptions& loss = {},
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// `epoch,train_loss,val_loss`, one row per epoch.
void write_loss_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

// Parameter bundle (kind "params"); `extra` is stored under the manifest key "meta".
void save_params(const UNet<float>& net, const std::filesystem::path& dir,
                 const nlohmann::json& extra = nlohmann::json::object());
// Throws IoError on malformed bundles and ConfigError when a stored tensor does
// not match the expected configuration.
UNet<float> load_params(const std::filesystem::path& dir, const UNetConfig& expected);
UNet<float> load_params(const std::filesystem::path& dir);
nlohmann::json params_meta(const std::filesystem::path& dir);

nlohmann::json to_json(const UNetConfig& c);
UNetConfig unet_config_from_json(const nlohmann::json& j);

}  // namespace nfsr
