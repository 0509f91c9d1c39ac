#include "nfsr/unet.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "nfsr/error.hpp"
#include "nfsr/rng.hpp"

namespace nfsr {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

std::string stage_name(const char* prefix, int k) { return prefix + std::to_string(k + 1); }

constexpr Uninitialized kUninit{};

// Per-thread im2col scratch, grown on demand and never shrunk.
template <class T>
T* scratch(int slot, std::size_t count) {
  thread_local Buffer<T> bufs[2];
  if (bufs[slot].size() < count) bufs[slot].resize(count);
  return bufs[slot].data();
}

// ---------------------------------------------------------------- conv 3x3, pad 1

template <class T>
void im2col3(const T* in, std::size_t C, std::size_t H, std::size_t W, T* col) {
  const std::size_t hw = H * W;
  for (std::size_t c = 0; c < C; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
        const int dy = ky - 1, dx = kx - 1;
        for (std::size_t y = 0; y < H; ++y) {
          T* row = dst + y * W;
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(H)) {
            std::fill(row, row + W, T(0));
            continue;
          }
          const T* src = in + c * hw + static_cast<std::size_t>(sy) * W;
          if (dx == 0) {
            std::memcpy(row, src, W * sizeof(T));
          } else if (dx < 0) {
            row[0] = T(0);
            std::memcpy(row + 1, src, (W - 1) * sizeof(T));
          } else {
            std::memcpy(row, src + 1, (W - 1) * sizeof(T));
            row[W - 1] = T(0);
          }
        }
      }
}

template <class T>
void col2im3_add(const T* col, std::size_t C, std::size_t H, std::size_t W, T* out) {
  const std::size_t hw = H * W;
  for (std::size_t c = 0; c < C; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
        const int dy = ky - 1, dx = kx - 1;
        for (std::size_t y = 0; y < H; ++y) {
          const long sy = static_cast<long>(y) + dy;
          if (sy < 0 || sy >= static_cast<long>(H)) continue;
          const T* row = src + y * W;
          T* dst = out + c * hw + static_cast<std::size_t>(sy) * W;
          if (dx == 0) {
            for (std::size_t x = 0; x < W; ++x) dst[x] += row[x];
          } else if (dx < 0) {
            for (std::size_t x = 1; x < W; ++x) dst[x - 1] += row[x];
          } else {
            for (std::size_t x = 0; x + 1 < W; ++x) dst[x + 1] += row[x];
          }
        }
      }
}

template <class T>
Tensor4<T> conv3(const Tensor4<T>& x, const ParamTensor<T>& w) {
  const std::size_t cout = w.shape[0], k = x.c * 9, hw = x.plane();
  Tensor4<T> y(x.n, cout, x.h, x.w, kUninit);
  T* col = scratch<T>(0, k * hw);
  const CMapR<T> wm(w.values.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < x.n; ++i) {
    im2col3(x.sample(i), x.c, x.h, x.w, col);
    MapR<T>(y.sample(i), cout, hw).noalias() = wm * CMapR<T>(col, k, hw);
  }
  return y;
}

template <class T>
void conv3_backward(const Tensor4<T>& x, const ParamTensor<T>& w, const Tensor4<T>& dy,
                    std::vector<T>& dw, Tensor4<T>* dx) {
  const std::size_t cout = w.shape[0], k = x.c * 9, hw = x.plane();
  T* col = scratch<T>(0, k * hw);
  T* dcol = dx ? scratch<T>(1, k * hw) : nullptr;
  if (dx) *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
  const CMapR<T> wm(w.values.data(), cout, k);
  MapR<T> dwm(dw.data(), cout, k);
  for (std::size_t i = 0; i < x.n; ++i) {
    im2col3(x.sample(i), x.c, x.h, x.w, col);
    const CMapR<T> g(dy.sample(i), cout, hw);
    dwm.noalias() += g * CMapR<T>(col, k, hw).transpose();
    if (dx) {
      MapR<T>(dcol, k, hw).noalias() = wm.transpose() * g;
      col2im3_add(dcol, x.c, x.h, x.w, dx->sample(i));
    }
  }
}

// ---------------------------------------------------------------- batch norm

template <class T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <class T>
using CArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// Batch statistics, running-statistics update and normalization followed by
// ReLU, in place: z holds the post-ReLU activation on exit.
template <class T>
void bn_relu_train(Tensor4<T>& z, const ParamTensor<T>& gamma, const ParamTensor<T>& beta,
                   ParamTensor<T>& rmean, ParamTensor<T>& rvar, BnCache<T>& cache) {
  const std::size_t m = z.n * z.plane();
  const auto hw = static_cast<Eigen::Index>(z.plane());
  cache.xhat.resize(z.size());
  cache.inv_std.assign(z.c, 0.0);
  for (std::size_t ch = 0; ch < z.c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < z.n; ++i) sum += CArrMap<T>(z.channel(i, ch), hw).template cast<double>().sum();
    const double mean = sum / static_cast<double>(m);
    double sq = 0.0;
    for (std::size_t i = 0; i < z.n; ++i)
      sq += (CArrMap<T>(z.channel(i, ch), hw).template cast<double>() - mean).square().sum();
    const double var = sq / static_cast<double>(m);
    const double inv = 1.0 / std::sqrt(var + kBnEps);
    cache.inv_std[ch] = inv;
    const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
    rmean.values[ch] = static_cast<T>((1.0 - kBnMomentum) * rmean.values[ch] + kBnMomentum * mean);
    rvar.values[ch] = static_cast<T>((1.0 - kBnMomentum) * rvar.values[ch] + kBnMomentum * unbiased);
    const T g = gamma.values[ch], b = beta.values[ch];
    const T tm = static_cast<T>(mean), ti = static_cast<T>(inv);
    for (std::size_t i = 0; i < z.n; ++i) {
      T* p = z.channel(i, ch);
      ArrMap<T> xh(cache.xhat.data() + (p - z.data.data()), hw);
      ArrMap<T> a(p, hw);
      xh = (a - tm) * ti;
      a = (xh * g + b).max(T(0));
    }
  }
}

template <class T>
void bn_eval(Tensor4<T>& z, const NetParams<T>& p, const std::string& name) {
  const auto& gamma = p.at(name + ".gamma").values;
  const auto& beta = p.at(name + ".beta").values;
  const auto& rm = p.at(name + ".running_mean").values;
  const auto& rv = p.at(name + ".running_var").values;
  for (std::size_t i = 0; i < z.n; ++i)
    for (std::size_t ch = 0; ch < z.c; ++ch) {
      const T scale = static_cast<T>(gamma[ch] / std::sqrt(static_cast<double>(rv[ch]) + kBnEps));
      const T shift = beta[ch] - scale * rm[ch];
      T* q = z.channel(i, ch);
      for (std::size_t k = 0; k < z.plane(); ++k) q[k] = scale * q[k] + shift;
    }
}

// dy holds dL/d(post-ReLU output) on entry and dL/dz on exit; `out` is the
// post-ReLU activation recorded in the forward pass.
template <class T>
void bn_relu_backward(Tensor4<T>& dy, const Tensor4<T>& out, const ParamTensor<T>& gamma,
                      const BnCache<T>& cache, std::vector<T>& dgamma, std::vector<T>& dbeta) {
  const double m = static_cast<double>(dy.n * dy.plane());
  const auto hw = static_cast<Eigen::Index>(dy.plane());
  for (std::size_t ch = 0; ch < dy.c; ++ch) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t i = 0; i < dy.n; ++i) {
      const std::size_t off = static_cast<std::size_t>(dy.channel(i, ch) - dy.data.data());
      ArrMap<T> g(dy.data.data() + off, hw);
      g = (CArrMap<T>(out.data.data() + off, hw) > T(0)).select(g, T(0));
      const CArrMap<T> xh(cache.xhat.data() + off, hw);
      sum_dy += g.template cast<double>().sum();
      sum_dy_xh += (g * xh).template cast<double>().sum();
    }
    dgamma[ch] += static_cast<T>(sum_dy_xh);
    dbeta[ch] += static_cast<T>(sum_dy);
    const double scale = gamma.values[ch] * cache.inv_std[ch];
    const T ts = static_cast<T>(scale), tmd = static_cast<T>(sum_dy / m),
            tmx = static_cast<T>(sum_dy_xh / m);
    for (std::size_t i = 0; i < dy.n; ++i) {
      const std::size_t off = static_cast<std::size_t>(dy.channel(i, ch) - dy.data.data());
      ArrMap<T> g(dy.data.data() + off, hw);
      g = ts * (g - tmd - CArrMap<T>(cache.xhat.data() + off, hw) * tmx);
    }
  }
}

// ---------------------------------------------------------------- elementwise / structural

template <class T>
void relu(Tensor4<T>& t) {
  for (T& v : t.data) v = v > T(0) ? v : T(0);
}

template <class T>
Tensor4<T> maxpool(const Tensor4<T>& x) {
  Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2, kUninit);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t ch = 0; ch < x.c; ++ch)
      for (std::size_t r = 0; r < y.h; ++r)
        for (std::size_t c = 0; c < y.w; ++c)
          y(i, ch, r, c) = std::max(std::max(x(i, ch, 2 * r, 2 * c), x(i, ch, 2 * r, 2 * c + 1)),
                                    std::max(x(i, ch, 2 * r + 1, 2 * c), x(i, ch, 2 * r + 1, 2 * c + 1)));
  return y;
}

// Routes each pooled gradient to the first maximal element of its window.
template <class T>
void maxpool_backward_add(const Tensor4<T>& x, const Tensor4<T>& dy, Tensor4<T>& dx) {
  for (std::size_t i = 0; i < dy.n; ++i)
    for (std::size_t ch = 0; ch < dy.c; ++ch)
      for (std::size_t r = 0; r < dy.h; ++r)
        for (std::size_t c = 0; c < dy.w; ++c) {
          std::size_t br = 2 * r, bc = 2 * c;
          T best = x(i, ch, br, bc);
          for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b)
              if (x(i, ch, 2 * r + a, 2 * c + b) > best) {
                best = x(i, ch, 2 * r + a, 2 * c + b);
                br = 2 * r + a;
                bc = 2 * c + b;
              }
          dx(i, ch, br, bc) += dy(i, ch, r, c);
        }
}

// Transposed conv, kernel 2, stride 2. Weight layout [cout][2][2][cin].
template <class T>
Tensor4<T> upconv(const Tensor4<T>& x, const ParamTensor<T>& w, const ParamTensor<T>& bias) {
  const std::size_t cout = w.shape[0], hw = x.plane();
  Tensor4<T> y(x.n, cout, 2 * x.h, 2 * x.w, kUninit);
  T* tmp = scratch<T>(0, cout * 4 * hw);
  const CMapR<T> wm(w.values.data(), cout * 4, x.c);
  for (std::size_t i = 0; i < x.n; ++i) {
    MapR<T>(tmp, cout * 4, hw).noalias() = wm * CMapR<T>(x.sample(i), x.c, hw);
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ab = 0; ab < 4; ++ab) {
        const T* src = tmp + (co * 4 + ab) * hw;
        const std::size_t a = ab / 2, b = ab % 2;
        for (std::size_t r = 0; r < x.h; ++r)
          for (std::size_t c = 0; c < x.w; ++c)
            y(i, co, 2 * r + a, 2 * c + b) = src[r * x.w + c] + bias.values[co];
      }
  }
  return y;
}

template <class T>
Tensor4<T> upconv_backward(const Tensor4<T>& x, const ParamTensor<T>& w, const Tensor4<T>& dy,
                           std::vector<T>& dw, std::vector<T>& dbias) {
  const std::size_t cout = w.shape[0], hw = x.plane();
  Tensor4<T> dx(x.n, x.c, x.h, x.w, kUninit);
  T* tmp = scratch<T>(0, cout * 4 * hw);
  const CMapR<T> wm(w.values.data(), cout * 4, x.c);
  MapR<T> dwm(dw.data(), cout * 4, x.c);
  for (std::size_t i = 0; i < x.n; ++i) {
    for (std::size_t co = 0; co < cout; ++co) {
      double bsum = 0.0;
      for (std::size_t ab = 0; ab < 4; ++ab) {
        T* dst = tmp + (co * 4 + ab) * hw;
        const std::size_t a = ab / 2, b = ab % 2;
        for (std::size_t r = 0; r < x.h; ++r)
          for (std::size_t c = 0; c < x.w; ++c) {
            dst[r * x.w + c] = dy(i, co, 2 * r + a, 2 * c + b);
            bsum += dst[r * x.w + c];
          }
      }
      dbias[co] += static_cast<T>(bsum);
    }
    const CMapR<T> g(tmp, cout * 4, hw);
    dwm.noalias() += g * CMapR<T>(x.sample(i), x.c, hw).transpose();
    MapR<T>(dx.sample(i), x.c, hw).noalias() = wm.transpose() * g;
  }
  return dx;
}

template <class T>
Tensor4<T> concat(const Tensor4<T>& a, const Tensor4<T>& b) {
  Tensor4<T> y(a.n, a.c + b.c, a.h, a.w, kUninit);
  for (std::size_t i = 0; i < a.n; ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), y.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), y.sample(i) + a.sample_size());
  }
  return y;
}

template <class T>
void split(const Tensor4<T>& g, std::size_t ca, Tensor4<T>& ga, Tensor4<T>& gb) {
  ga = Tensor4<T>(g.n, ca, g.h, g.w, kUninit);
  gb = Tensor4<T>(g.n, g.c - ca, g.h, g.w, kUninit);
  for (std::size_t i = 0; i < g.n; ++i) {
    std::copy(g.sample(i), g.sample(i) + ga.sample_size(), ga.sample(i));
    std::copy(g.sample(i) + ga.sample_size(), g.sample(i) + g.sample_size(), gb.sample(i));
  }
}

// Inverse sigmoid of an input level, clamped away from 0 and 1.
template <class T>
T logit(T v) {
  const T c = std::clamp(v, T(1e-4), T(1 - 1e-4));
  return std::log(c / (T(1) - c));
}

template <class T>
Tensor4<T> head(const Tensor4<T>& x, const ParamTensor<T>& w, const ParamTensor<T>& bias,
                const Tensor4<T>* skip) {
  Tensor4<T> y(x.n, 1, x.h, x.w, kUninit);
  const CMapR<T> wm(w.values.data(), 1, x.c);
  for (std::size_t i = 0; i < x.n; ++i) {
    MapR<T> out(y.sample(i), 1, x.plane());
    out.noalias() = wm * CMapR<T>(x.sample(i), x.c, x.plane());
    for (std::size_t k = 0; k < x.plane(); ++k) {
      T z = out(0, k) + bias.values[0];
      if (skip) z += logit(skip->sample(i)[k]);
      out(0, k) = T(1) / (T(1) + std::exp(-z));
    }
  }
  return y;
}

template <class T>
void add_into(Tensor4<T>& a, const Tensor4<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

}  // namespace

// ---------------------------------------------------------------- config / params

void UNetConfig::validate() const {
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (stages < 1) throw ConfigError("stages must be >= 1");
  if (kernel != 3) throw ConfigError("only 3x3 convolutions are supported");
  if (pool != 2) throw ConfigError("only 2x2 pooling is supported");
  if (in_size < 2) throw ConfigError("in_size must be >= 2");
  if (pad_to < in_size) throw ConfigError("pad_to must be >= in_size");
  if (pad_to % (1 << stages) != 0)
    throw ConfigError("pad_to (" + std::to_string(pad_to) + ") must be divisible by 2^stages (" +
                      std::to_string(1 << stages) + ")");
  if (pad_to - in_size >= in_size) throw ConfigError("reflection padding exceeds the input size");
}

template <class T>
std::size_t NetParams<T>::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

template <class T>
ParamTensor<T>& NetParams<T>::at(const std::string& name) {
  return const_cast<ParamTensor<T>&>(std::as_const(*this).at(name));
}

template <class T>
const ParamTensor<T>& NetParams<T>::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  for (const auto& t : buffers)
    if (t.name == name) return t;
  throw ConfigError("unknown parameter '" + name + "'");
}

template <class T>
NetParams<T> NetParams<T>::zeros_like() const {
  NetParams out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors)
    out.tensors.push_back({t.name, t.shape, std::vector<T>(t.values.size(), T(0))});
  return out;
}

namespace {

template <class T>
void add_tensor(std::vector<ParamTensor<T>>& list, std::string name, std::vector<std::size_t> shape,
                T fill = T(0)) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  list.push_back({std::move(name), std::move(shape), std::vector<T>(n, fill)});
}

template <class T>
void add_double_conv(NetParams<T>& p, const std::string& prefix, std::size_t cin, std::size_t cout) {
  add_tensor(p.tensors, prefix + ".conv1.weight", {cout, cin, 3, 3});
  add_tensor(p.tensors, prefix + ".bn1.gamma", {cout}, T(1));
  add_tensor(p.tensors, prefix + ".bn1.beta", {cout});
  add_tensor(p.tensors, prefix + ".conv2.weight", {cout, cout, 3, 3});
  add_tensor(p.tensors, prefix + ".bn2.gamma", {cout}, T(1));
  add_tensor(p.tensors, prefix + ".bn2.beta", {cout});
  for (const char* bn : {".bn1", ".bn2"}) {
    add_tensor(p.buffers, prefix + bn + ".running_mean", {cout});
    add_tensor(p.buffers, prefix + bn + ".running_var", {cout}, T(1));
  }
}

}  // namespace

template <class T>
UNet<T>::UNet(const UNetConfig& config) : config_(config) {
  config_.validate();
  const int s_count = config_.stages;
  std::size_t cin = 1;
  for (int k = 0; k < s_count; ++k) {
    add_double_conv(params_, stage_name("enc", k), cin, config_.width(k));
    cin = config_.width(k);
  }
  add_double_conv(params_, "bottleneck", cin, config_.width(s_count));
  for (int k = s_count - 1; k >= 0; --k) {
    const std::size_t c = config_.width(k);
    add_tensor(params_.tensors, stage_name("dec", k) + ".up.weight", {c, 2, 2, 2 * c});
    add_tensor(params_.tensors, stage_name("dec", k) + ".up.bias", {c});
    add_double_conv(params_, stage_name("dec", k), 2 * c, c);
  }
  add_tensor(params_.tensors, "head.weight", {1, static_cast<std::size_t>(config_.width(0))});
  add_tensor(params_.tensors, "head.bias", {1});
}

template <class T>
void UNet<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& t : params_.tensors) {
    const auto& name = t.name;
    auto ends_with = [&](const std::string& suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".gamma")) {
      std::fill(t.values.begin(), t.values.end(), T(1));
    } else if (ends_with(".weight")) {
      // fan_in: cin*9 for 3x3, cin for the transposed and 1x1 convolutions.
      const std::size_t fan_in = ends_with(".up.weight")
                                     ? t.shape[3]
                                     : t.values.size() / t.shape[0];
      const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (T& v : t.values) v = static_cast<T>(std_dev * rng.normal());
    } else {
      std::fill(t.values.begin(), t.values.end(), T(0));
    }
  }
  for (auto& b : params_.buffers)
    std::fill(b.values.begin(), b.values.end(),
              b.name.ends_with(".running_var") ? T(1) : T(0));
}

namespace {

template <class T>
Tensor4<T> block_eval(const Tensor4<T>& in, const NetParams<T>& p, const std::string& prefix) {
  Tensor4<T> z = conv3(in, p.at(prefix + ".conv1.weight"));
  bn_eval(z, p, prefix + ".bn1");
  relu(z);
  Tensor4<T> z2 = conv3(z, p.at(prefix + ".conv2.weight"));
  bn_eval(z2, p, prefix + ".bn2");
  relu(z2);
  return z2;
}

template <class T>
const Tensor4<T>& block_train(Tensor4<T> in, NetParams<T>& p, const std::string& prefix,
                              BlockTape<T>& tape) {
  tape.in = std::move(in);
  tape.a1 = conv3(tape.in, p.at(prefix + ".conv1.weight"));
  bn_relu_train(tape.a1, p.at(prefix + ".bn1.gamma"), p.at(prefix + ".bn1.beta"),
                p.at(prefix + ".bn1.running_mean"), p.at(prefix + ".bn1.running_var"), tape.bn1);
  tape.a2 = conv3(tape.a1, p.at(prefix + ".conv2.weight"));
  bn_relu_train(tape.a2, p.at(prefix + ".bn2.gamma"), p.at(prefix + ".bn2.beta"),
                p.at(prefix + ".bn2.running_mean"), p.at(prefix + ".bn2.running_var"), tape.bn2);
  return tape.a2;
}

// g: dL/d(block output). Returns dL/d(block input) when requested.
template <class T>
Tensor4<T> block_backward(Tensor4<T> g, const BlockTape<T>& tape, const NetParams<T>& p,
                          NetParams<T>& grads, const std::string& prefix, bool need_input_grad) {
  bn_relu_backward(g, tape.a2, p.at(prefix + ".bn2.gamma"), tape.bn2,
                   grads.at(prefix + ".bn2.gamma").values, grads.at(prefix + ".bn2.beta").values);
  Tensor4<T> ga1;
  conv3_backward(tape.a1, p.at(prefix + ".conv2.weight"), g, grads.at(prefix + ".conv2.weight").values,
                 &ga1);
  bn_relu_backward(ga1, tape.a1, p.at(prefix + ".bn1.gamma"), tape.bn1,
                   grads.at(prefix + ".bn1.gamma").values, grads.at(prefix + ".bn1.beta").values);
  Tensor4<T> gin;
  conv3_backward(tape.in, p.at(prefix + ".conv1.weight"), ga1,
                 grads.at(prefix + ".conv1.weight").values, need_input_grad ? &gin : nullptr);
  return gin;
}

}  // namespace

template <class T>
Tensor4<T> UNet<T>::forward(const Tensor4<T>& input) const {
  const auto in_size = static_cast<std::size_t>(config_.in_size);
  if (input.c != 1 || input.h != in_size || input.w != in_size)
    throw ConfigError("network input must be (N, 1, " + std::to_string(in_size) + ", " +
                      std::to_string(in_size) + ")");
  const std::size_t before = static_cast<std::size_t>(config_.pad_to - config_.in_size) / 2;
  const std::size_t after = static_cast<std::size_t>(config_.pad_to - config_.in_size) - before;
  const Tensor4<T> padded = reflect_pad(input, before, after);
  Tensor4<T> x = padded;
  std::vector<Tensor4<T>> skips;
  for (int k = 0; k < config_.stages; ++k) {
    skips.push_back(block_eval(x, params_, stage_name("enc", k)));
    x = maxpool(skips.back());
  }
  x = block_eval(x, params_, std::string("bottleneck"));
  for (int k = config_.stages - 1; k >= 0; --k) {
    const std::string prefix = stage_name("dec", k);
    Tensor4<T> up = upconv(x, params_.at(prefix + ".up.weight"), params_.at(prefix + ".up.bias"));
    x = block_eval(concat(skips[k], up), params_, prefix);
    skips[k] = {};
  }
  return crop(head(x, params_.at("head.weight"), params_.at("head.bias"),
                    config_.residual ? &padded : nullptr),
              before, in_size);
}

template <class T>
Tensor4<T> UNet<T>::forward_train(const Tensor4<T>& input, Tape<T>& tape) {
  const auto in_size = static_cast<std::size_t>(config_.in_size);
  if (input.c != 1 || input.h != in_size || input.w != in_size)
    throw ConfigError("network input must be (N, 1, " + std::to_string(in_size) + ", " +
                      std::to_string(in_size) + ")");
  const std::size_t before = static_cast<std::size_t>(config_.pad_to - config_.in_size) / 2;
  const std::size_t after = static_cast<std::size_t>(config_.pad_to - config_.in_size) - before;
  const int s_count = config_.stages;
  tape.enc.assign(s_count, {});
  tape.dec.assign(s_count, {});
  Tensor4<T> x = reflect_pad(input, before, after);
  const Tensor4<T> padded = config_.residual ? x : Tensor4<T>{};
  for (int k = 0; k < s_count; ++k)
    x = maxpool(block_train(std::move(x), params_, stage_name("enc", k), tape.enc[k]));
  const Tensor4<T>* deeper = &block_train(std::move(x), params_, "bottleneck", tape.bottleneck);
  for (int k = s_count - 1; k >= 0; --k) {
    const std::string prefix = stage_name("dec", k);
    Tensor4<T> up = upconv(*deeper, params_.at(prefix + ".up.weight"), params_.at(prefix + ".up.bias"));
    deeper = &block_train(concat(tape.enc[k].a2, up), params_, prefix, tape.dec[k]);
  }
  tape.out = head(*deeper, params_.at("head.weight"), params_.at("head.bias"),
                  config_.residual ? &padded : nullptr);
  return crop(tape.out, before, in_size);
}

template <class T>
NetParams<T> UNet<T>::backward(const Tape<T>& tape, const Tensor4<T>& grad_output) const {
  const auto in_size = static_cast<std::size_t>(config_.in_size);
  const std::size_t before = static_cast<std::size_t>(config_.pad_to - config_.in_size) / 2;
  if (grad_output.n != tape.out.n || grad_output.c != 1 || grad_output.h != in_size ||
      grad_output.w != in_size)
    throw ConfigError("output gradient does not match the recorded batch");
  NetParams<T> grads = params_.zeros_like();
  const int s_count = config_.stages;

  // Sigmoid and head.
  Tensor4<T> gz(tape.out.n, 1, tape.out.h, tape.out.w);
  for (std::size_t i = 0; i < gz.n; ++i)
    for (std::size_t y = 0; y < in_size; ++y)
      for (std::size_t x = 0; x < in_size; ++x) {
        const T s = tape.out(i, 0, y + before, x + before);
        gz(i, 0, y + before, x + before) = grad_output(i, 0, y, x) * s * (T(1) - s);
      }
  const Tensor4<T>& head_in = tape.dec[0].a2;
  Tensor4<T> g(head_in.n, head_in.c, head_in.h, head_in.w, kUninit);
  {
    auto& dw = grads.at("head.weight").values;
    double db = 0.0;
    const CMapR<T> wm(params_.at("head.weight").values.data(), 1, head_in.c);
    MapR<T> dwm(dw.data(), 1, head_in.c);
    for (std::size_t i = 0; i < gz.n; ++i) {
      const CMapR<T> gi(gz.sample(i), 1, gz.plane());
      dwm.noalias() += gi * CMapR<T>(head_in.sample(i), head_in.c, head_in.plane()).transpose();
      MapR<T>(g.sample(i), head_in.c, head_in.plane()).noalias() = wm.transpose() * gi;
      db += gi.template cast<double>().sum();
    }
    grads.at("head.bias").values[0] = static_cast<T>(db);
  }

  // Decoder, shallow to deep.
  std::vector<Tensor4<T>> skip_grads(s_count);
  for (int k = 0; k < s_count; ++k) {
    const std::string prefix = stage_name("dec", k);
    Tensor4<T> gcat = block_backward(std::move(g), tape.dec[k], params_, grads, prefix, true);
    Tensor4<T> gup;
    split(gcat, tape.enc[k].a2.c, skip_grads[k], gup);
    const Tensor4<T>& up_in = k + 1 < s_count ? tape.dec[k + 1].a2 : tape.bottleneck.a2;
    g = upconv_backward(up_in, params_.at(prefix + ".up.weight"), gup,
                        grads.at(prefix + ".up.weight").values, grads.at(prefix + ".up.bias").values);
  }

  // Bottleneck and encoder, deep to shallow.
  g = block_backward(std::move(g), tape.bottleneck, params_, grads, "bottleneck", true);
  for (int k = s_count - 1; k >= 0; --k) {
    Tensor4<T> ga = std::move(skip_grads[k]);
    maxpool_backward_add(tape.enc[k].a2, g, ga);
    g = block_backward(std::move(ga), tape.enc[k], params_, grads, stage_name("enc", k), k > 0);
  }

  for (const auto& t : grads.tensors)
    for (T v : t.values)
      if (!std::isfinite(static_cast<double>(v)))
        throw NumericError("non-finite gradient in layer '" + t.name + "'");
  return grads;
}

template <class T>
std::vector<LayerInfo> UNet<T>::layers() const {
  std::vector<LayerInfo> out;
  int size = config_.pad_to, cin = 1;
  auto block = [&](const std::string& prefix, int cout) {
    out.push_back({prefix + ".conv1", LayerKind::Conv3x3, cin, cout, size, size});
    out.push_back({prefix + ".bn1", LayerKind::BatchNorm, cout, cout, size, size});
    out.push_back({prefix + ".conv2", LayerKind::Conv3x3, cout, cout, size, size});
    out.push_back({prefix + ".bn2", LayerKind::BatchNorm, cout, cout, size, size});
    cin = cout;
  };
  for (int k = 0; k < config_.stages; ++k) {
    block(stage_name("enc", k), config_.width(k));
    out.push_back({stage_name("enc", k) + ".pool", LayerKind::MaxPool, cin, cin, size, size / 2});
    size /= 2;
  }
  block("bottleneck", config_.width(config_.stages));
  for (int k = config_.stages - 1; k >= 0; --k) {
    const int c = config_.width(k);
    out.push_back({stage_name("dec", k) + ".up", LayerKind::UpConv, cin, c, size, size * 2});
    size *= 2;
    out.push_back({stage_name("dec", k) + ".concat", LayerKind::Concat, c, 2 * c, size, size});
    cin = 2 * c;
    block(stage_name("dec", k), c);
  }
  out.push_back({"head", LayerKind::Conv1x1, cin, 1, size, size});
  out.push_back({"head.sigmoid", LayerKind::Sigmoid, 1, 1, size, size});
  return out;
}

template struct NetParams<float>;
template struct NetParams<double>;
template class UNet<float>;
template class UNet<double>;

// ---------------------------------------------------------------- input upsampling

int infer_factor(std::size_t low, std::size_t target) {
  for (int f : {2, 3})
    if (downsampled_size(target, f) == low) return f;
  throw ConfigError("a " + std::to_string(low) + "-point map is not a factor-2 or factor-3 decimation of " +
                    std::to_string(target) + " points");
}

ChannelMap upsample_input(const ChannelMap& low, std::size_t target) {
  if (low.rows() != low.cols()) throw ConfigError("upsample_input expects a square map");
  const int f = infer_factor(low.rows(), target);
  const std::size_t n = low.rows();
  auto coord = [&](std::size_t t, std::size_t& i0, double& frac) {
    const double u = static_cast<double>(t) / f;
    i0 = std::min(static_cast<std::size_t>(u), n - 2);
    frac = u - static_cast<double>(i0);
  };
  ChannelMap out;
  out.kind = low.kind;
  out.denorm = low.denorm;
  out.values = Array2D<float>(target, target);
  for (std::size_t r = 0; r < target; ++r) {
    std::size_t i0;
    double fy;
    coord(r, i0, fy);
    for (std::size_t c = 0; c < target; ++c) {
      std::size_t j0;
      double fx;
      coord(c, j0, fx);
      const double v00 = low.values(i0, j0), v01 = low.values(i0, j0 + 1);
      const double v10 = low.values(i0 + 1, j0), v11 = low.values(i0 + 1, j0 + 1);
      const double v = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      out.values(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

ChannelMap restore_with(const UNet<float>& net, const ChannelMap& low) {
  const auto size = static_cast<std::size_t>(net.config().in_size);
  const ChannelMap up = upsample_input(low, size);
  const Tensor4<float> y = net.forward(stack_maps<float, float>({&up.values}));
  ChannelMap out;
  out.kind = low.kind;
  out.denorm = low.denorm;
  out.values = unstack_map<float, float>(y, 0);
  return out;
}

}  // namespace nfsr
