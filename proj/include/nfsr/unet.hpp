#pragma once

// Encoder-decoder super-resolution network.
//
//   enc_k : [conv3x3 -> BN -> ReLU] x 2, width base * 2^(k-1), then 2x2 max-pool
//   bottleneck : [conv3x3 -> BN -> ReLU] x 2, width base * 2^stages
//   dec_k : 2x2 stride-2 transposed conv, concat(skip_k, up), [conv3x3 -> BN -> ReLU] x 2
//   head : conv1x1 -> sigmoid; with `residual` the logit of the padded input is
//          added before the sigmoid, so the network learns a correction to it
//
// Inputs are reflect-padded from in_size to pad_to and the output is cropped back.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nfsr/dataio.hpp"
#include "nfsr/tensor.hpp"

namespace nfsr {

struct UNetConfig {
  int base_channels = 64;
  int stages = 4;
  int in_size = 86;
  int pad_to = 96;
  int kernel = 3;
  int pool = 2;
  bool residual = true;

  void validate() const;
  int width(int stage) const { return base_channels << stage; }  // stage 0-based; stages = bottleneck
  bool operator==(const UNetConfig&) const = default;
};

template <class T>
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;
};

// Learnable tensors plus batch-norm running statistics (buffers).
template <class T>
struct NetParams {
  std::vector<ParamTensor<T>> tensors;
  std::vector<ParamTensor<T>> buffers;

  std::size_t count() const;
  ParamTensor<T>& at(const std::string& name);
  const ParamTensor<T>& at(const std::string& name) const;
  // Same tensor layout with zero values and no buffers.
  NetParams zeros_like() const;
};

enum class LayerKind { Conv3x3, BatchNorm, MaxPool, UpConv, Concat, Conv1x1, Sigmoid };

struct LayerInfo {
  std::string name;
  LayerKind kind;
  int in_channels;
  int out_channels;
  int in_size;   // spatial edge at the layer input
  int out_size;  // spatial edge at the layer output
};

template <class T>
struct BnCache {
  Buffer<T> xhat;
  std::vector<double> inv_std;
};

template <class T>
struct BlockTape {
  Tensor4<T> in;
  BnCache<T> bn1, bn2;
  Tensor4<T> a1, a2;  // post-ReLU activations
};

// Activations recorded by a training-mode forward pass.
template <class T>
struct Tape {
  std::vector<BlockTape<T>> enc;
  BlockTape<T> bottleneck;
  std::vector<BlockTape<T>> dec;
  Tensor4<T> out;  // sigmoid output at pad_to resolution
};

template <class T>
class UNet {
 public:
  explicit UNet(const UNetConfig& config);

  const UNetConfig& config() const { return config_; }
  NetParams<T>& params() { return params_; }
  const NetParams<T>& params() const { return params_; }

  // Kaiming-normal convolution weights, unit BN scale, zero shifts and biases.
  void init(std::uint64_t seed);

  // Evaluation mode: BN uses running statistics; every sample is processed
  // independently. Input and output are (N, 1, in_size, in_size).
  Tensor4<T> forward(const Tensor4<T>& input) const;

  // Training mode: BN uses batch statistics and updates running statistics.
  Tensor4<T> forward_train(const Tensor4<T>& input, Tape<T>& tape);

  // Gradients of a loss with respect to every parameter, given dLoss/dOutput
  // at in_size resolution for the batch recorded in `tape`.
  NetParams<T> backward(const Tape<T>& tape, const Tensor4<T>& grad_output) const;

  std::vector<LayerInfo> layers() const;

 private:
  UNetConfig config_;
  NetParams<T> params_;
  std::vector<std::size_t> index_;  // parameter slot lookup, see unet.cpp
};

// Bilinear pre-upsampling: low(i, j) lands on target index (f i, f j); the
// factor is inferred from the sizes. Samples past the last anchor are linearly
// extrapolated, then clamped to [0, 1].
ChannelMap upsample_input(const ChannelMap& low, std::size_t target);
int infer_factor(std::size_t low, std::size_t target);

// Restores one low-resolution map with a trained network.
ChannelMap restore_with(const UNet<float>& net, const ChannelMap& low);

}  // namespace nfsr
