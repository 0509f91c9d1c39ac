#include "nfsr/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "nfsr/bundle.hpp"
#include "nfsr/rng.hpp"

namespace nfsr {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(lr_decay_factor >= 1.0)) throw ConfigError("lr_decay_factor must be >= 1");
  if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
  if (decay_every < 1 || decay_every > total_epochs)
    throw ConfigError("decay_every must lie in [1, total_epochs]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

TrainConfig TrainConfig::paper(ChannelKind kind) {
  TrainConfig c;
  if (kind == ChannelKind::Phase) {
    c.total_epochs = 300;
    c.decay_every = 75;
  }
  return c;
}

TrainConfig TrainConfig::toy(ChannelKind) {
  TrainConfig c;
  c.total_epochs = 30;
  c.decay_every = 20;
  return c;
}

double lr_schedule(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  return config.lr0 / std::pow(config.lr_decay_factor, std::floor(epoch / config.decay_every));
}

template <class T>
void adam_step(NetParams<T>& params, const NetParams<T>& grads, AdamState<T>& state, double lr,
               double beta1, double beta2, double eps) {
  if (grads.tensors.size() != params.tensors.size() || state.m.tensors.size() != params.tensors.size())
    throw ConfigError("adam_step: parameter/gradient layout mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& p = params.tensors[t].values;
    const auto& g = grads.tensors[t].values;
    auto& m = state.m.tensors[t].values;
    auto& v = state.v.tensors[t].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
      const double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(p[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
  }
}

template void adam_step(NetParams<float>&, const NetParams<float>&, AdamState<float>&, double,
                        double, double, double);
template void adam_step(NetParams<double>&, const NetParams<double>&, AdamState<double>&, double,
                        double, double, double);

std::vector<TrainingSample> load_samples(const Dataset& data, ChannelKind kind, bool train,
                                         int in_size) {
  std::vector<TrainingSample> out;
  for (const DatasetEntry* e : data.select(kind, train)) {
    SamplePair p = data.pair(*e);
    if (p.high.rows() != static_cast<std::size_t>(in_size))
      throw ConfigError("dataset maps are " + std::to_string(p.high.rows()) +
                        " points wide but the network expects " + std::to_string(in_size));
    out.push_back({upsample_input(p.low, static_cast<std::size_t>(in_size)).values,
                   std::move(p.high.values)});
  }
  return out;
}

namespace {

std::vector<const Array2D<float>*> inputs_of(const std::vector<TrainingSample>& s,
                                             const std::vector<std::size_t>& idx) {
  std::vector<const Array2D<float>*> out;
  for (std::size_t i : idx) out.push_back(&s[i].input);
  return out;
}

}  // namespace

double evaluate_loss(const UNet<float>& net, const std::vector<TrainingSample>& samples,
                     ChannelKind kind, const LossOptions& loss, int batch_size) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) idx.push_back(i);
    const Tensor4<float> y = net.forward(stack_maps<float, float>(inputs_of(samples, idx)));
    for (std::size_t b = 0; b < idx.size(); ++b)
      total += channel_loss(kind, cast_array<double>(samples[idx[b]].target),
                            unstack_map<float, double>(y, b), loss.weights, loss.msssim,
                            loss.variant)
                   .value;
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(const Dataset& data, ChannelKind kind, const TrainConfig& config,
                  const UNetConfig& unet, const LossOptions& loss,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  unet.validate();
  loss.weights.validate();
  loss.msssim.validate();
  const auto train_set = load_samples(data, kind, true, unet.in_size);
  const auto val_set = load_samples(data, kind, false, unet.in_size);
  if (train_set.empty()) throw ConfigError("dataset has no training maps");

  TrainResult result{UNet<float>(unet), 0.0, {}};
  UNet<float>& net = result.net;
  net.init(derive_seed(config.seed, 0x1417));
  auto adam = AdamState<float>::zeros_like(net.params());
  result.initial_val_loss = evaluate_loss(net, val_set, kind, loss, config.batch_size);

  std::vector<std::size_t> order(train_set.size());
  Tape<float> tape;
  for (int epoch = 0; epoch < config.total_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, 0xE0000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    const double lr = lr_schedule(config, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<long>(start),
          order.begin() + static_cast<long>(std::min(order.size(), start + config.batch_size)));
      const Tensor4<float> y = net.forward_train(stack_maps<float, float>(inputs_of(train_set, idx)), tape);
      Tensor4<float> grad(y.n, 1, y.h, y.w);
      const double inv_n = 1.0 / static_cast<double>(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const LossValue lv = channel_loss(kind, cast_array<double>(train_set[idx[b]].target),
                                          unstack_map<float, double>(y, b), loss.weights,
                                          loss.msssim, loss.variant);
        if (!std::isfinite(lv.value))
          throw TrainingDiverged("non-finite training loss in epoch " + std::to_string(epoch + 1),
                                 result.history);
        epoch_loss += lv.value;
        float* g = grad.sample(b);
        for (std::size_t k = 0; k < lv.grad.size(); ++k)
          g[k] = static_cast<float>(lv.grad.storage()[k] * inv_n);
      }
      NetParams<float> grads;
      try {
        grads = net.backward(tape, grad);
      } catch (const NumericError& e) {
        throw TrainingDiverged(e.what(), result.history);
      }
      adam_step(net.params(), grads, adam, lr, config.beta1, config.beta2, config.eps);
    }
    EpochRecord rec{epoch + 1, epoch_loss / static_cast<double>(order.size()),
                    evaluate_loss(net, val_set, kind, loss, config.batch_size), lr};
    result.history.push_back(rec);
    if (!std::isfinite(rec.train_loss))
      throw TrainingDiverged("training diverged in epoch " + std::to_string(rec.epoch), result.history);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_loss_csv(const std::vector<EpochRecord>& history, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,val_loss\n";
  out.precision(10);
  for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- persistence

nlohmann::json to_json(const UNetConfig& c) {
  return {{"base_channels", c.base_channels}, {"stages", c.stages}, {"in_size", c.in_size},
          {"pad_to", c.pad_to}, {"kernel", c.kernel}, {"pool", c.pool}, {"residual", c.residual}};
}

UNetConfig unet_config_from_json(const nlohmann::json& j) {
  UNetConfig c;
  c.base_channels = j.at("base_channels").get<int>();
  c.stages = j.at("stages").get<int>();
  c.in_size = j.at("in_size").get<int>();
  c.pad_to = j.at("pad_to").get<int>();
  c.kernel = j.at("kernel").get<int>();
  c.pool = j.at("pool").get<int>();
  c.residual = j.value("residual", false);
  return c;
}

void save_params(const UNet<float>& net, const fs::path& dir, const nlohmann::json& extra) {
  BundleWriter w(dir, "params");
  auto dump = [&](const std::vector<ParamTensor<float>>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : list) {
      std::vector<std::uint64_t> shape(t.shape.begin(), t.shape.end());
      arr.push_back({{"name", t.name}, {"array", w.append(t.values, shape).to_json()}});
    }
    return arr;
  };
  w.manifest()["unet"] = to_json(net.config());
  w.manifest()["tensors"] = dump(net.params().tensors);
  w.manifest()["buffers"] = dump(net.params().buffers);
  w.manifest()["meta"] = extra;
  w.finish();
}

namespace {

void fill_from(const BundleReader& r, const nlohmann::json& list, std::vector<ParamTensor<float>>& into,
               const fs::path& dir) {
  if (list.size() != into.size())
    throw ConfigError(dir.string() + ": parameter count " + std::to_string(list.size()) +
                      " does not match the network (" + std::to_string(into.size()) + ")");
  for (std::size_t i = 0; i < into.size(); ++i) {
    const auto& entry = list.at(i);
    const std::string name = entry.at("name").get<std::string>();
    const ArrayRef ref = ArrayRef::from_json(entry.at("array"));
    auto& t = into[i];
    const std::vector<std::uint64_t> want(t.shape.begin(), t.shape.end());
    if (name != t.name || ref.shape != want) {
      std::string got, exp;
      for (auto s : ref.shape) got += (got.empty() ? "" : "x") + std::to_string(s);
      for (auto s : want) exp += (exp.empty() ? "" : "x") + std::to_string(s);
      throw ConfigError(dir.string() + ": shape mismatch for '" + t.name + "': stored " + name +
                        " [" + got + "], expected [" + exp + "]");
    }
    t.values = r.read(ref);
  }
}

}  // namespace

UNet<float> load_params(const fs::path& dir, const UNetConfig& expected) {
  BundleReader r(dir, "params");
  UNet<float> net(expected);
  try {
    fill_from(r, r.manifest().at("tensors"), net.params().tensors, dir);
    fill_from(r, r.manifest().at("buffers"), net.params().buffers, dir);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + ": malformed parameter manifest (" + e.what() + ")");
  }
  return net;
}

UNet<float> load_params(const fs::path& dir) {
  BundleReader r(dir, "params");
  UNetConfig cfg;
  try {
    cfg = unet_config_from_json(r.manifest().at("unet"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + ": malformed parameter manifest (" + e.what() + ")");
  }
  return load_params(dir, cfg);
}

nlohmann::json params_meta(const fs::path& dir) {
  BundleReader r(dir, "params");
  return r.manifest().value("meta", nlohmann::json::object());
}

}  // namespace nfsr
