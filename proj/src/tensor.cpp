#include "nfsr/tensor.hpp"

#include "nfsr/error.hpp"

namespace nfsr {

template <class T, class U>
Tensor4<T> stack_maps(const std::vector<const Array2D<U>*>& maps) {
  if (maps.empty()) throw ConfigError("cannot stack an empty batch");
  const std::size_t h = maps.front()->rows(), w = maps.front()->cols();
  Tensor4<T> out(maps.size(), 1, h, w);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i]->rows() != h || maps[i]->cols() != w) throw ConfigError("batch maps differ in shape");
    T* dst = out.sample(i);
    for (std::size_t k = 0; k < h * w; ++k) dst[k] = static_cast<T>(maps[i]->storage()[k]);
  }
  return out;
}

template <class T, class U>
Array2D<U> unstack_map(const Tensor4<T>& t, std::size_t i) {
  Array2D<U> out(t.h, t.w);
  const T* src = t.channel(i, 0);
  for (std::size_t k = 0; k < t.plane(); ++k) out.storage()[k] = static_cast<U>(src[k]);
  return out;
}

namespace {

std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

template <class T>
Tensor4<T> reflect_pad(const Tensor4<T>& in, std::size_t before, std::size_t after) {
  Tensor4<T> out(in.n, in.c, in.h + before + after, in.w + before + after);
  const auto b = static_cast<std::ptrdiff_t>(before);
  for (std::size_t i = 0; i < in.n; ++i)
    for (std::size_t ch = 0; ch < in.c; ++ch)
      for (std::size_t y = 0; y < out.h; ++y) {
        const std::size_t sy =
            reflect_index(static_cast<std::ptrdiff_t>(y) - b, static_cast<std::ptrdiff_t>(in.h));
        for (std::size_t x = 0; x < out.w; ++x)
          out(i, ch, y, x) = in(i, ch, sy,
                                reflect_index(static_cast<std::ptrdiff_t>(x) - b,
                                              static_cast<std::ptrdiff_t>(in.w)));
      }
  return out;
}

template <class T>
Tensor4<T> crop(const Tensor4<T>& in, std::size_t offset, std::size_t size) {
  if (offset + size > in.h || offset + size > in.w) throw ConfigError("crop window out of range");
  Tensor4<T> out(in.n, in.c, size, size);
  for (std::size_t i = 0; i < in.n; ++i)
    for (std::size_t ch = 0; ch < in.c; ++ch)
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) out(i, ch, y, x) = in(i, ch, y + offset, x + offset);
  return out;
}

template Tensor4<float> stack_maps<float, float>(const std::vector<const Array2D<float>*>&);
template Tensor4<float> stack_maps<float, double>(const std::vector<const Array2D<double>*>&);
template Tensor4<double> stack_maps<double, float>(const std::vector<const Array2D<float>*>&);
template Tensor4<double> stack_maps<double, double>(const std::vector<const Array2D<double>*>&);
template Array2D<float> unstack_map<float, float>(const Tensor4<float>&, std::size_t);
template Array2D<double> unstack_map<float, double>(const Tensor4<float>&, std::size_t);
template Array2D<double> unstack_map<double, double>(const Tensor4<double>&, std::size_t);
template Array2D<float> unstack_map<double, float>(const Tensor4<double>&, std::size_t);
template Tensor4<float> reflect_pad(const Tensor4<float>&, std::size_t, std::size_t);
template Tensor4<double> reflect_pad(const Tensor4<double>&, std::size_t, std::size_t);
template Tensor4<float> crop(const Tensor4<float>&, std::size_t, std::size_t);
template Tensor4<double> crop(const Tensor4<double>&, std::size_t, std::size_t);

}  // namespace nfsr
