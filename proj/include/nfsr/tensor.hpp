#pragma once

#include <cstddef>
#include <memory>
#include <type_traits>
#include <utility>
#include <vector>

#include "nfsr/array2d.hpp"

namespace nfsr {

// Allocator that default-initializes, so resize() leaves arithmetic types
// uninitialized; used for buffers that are fully overwritten.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <class U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

template <class T>
using Buffer = std::vector<T, DefaultInitAllocator<T>>;

struct Uninitialized {};

// Dense NCHW tensor.
template <class T>
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  Buffer<T> data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, T(0)) {}
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, Uninitialized)
      : n(n_), c(c_), h(h_), w(w_) {
    data.resize(n_ * c_ * h_ * w_);
  }

  std::size_t plane() const { return h * w; }
  std::size_t sample_size() const { return c * h * w; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  T* sample(std::size_t i) { return data.data() + i * sample_size(); }
  const T* sample(std::size_t i) const { return data.data() + i * sample_size(); }
  T* channel(std::size_t i, std::size_t ch) { return sample(i) + ch * plane(); }
  const T* channel(std::size_t i, std::size_t ch) const { return sample(i) + ch * plane(); }

  T& operator()(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) {
    return data[((i * c + ch) * h + y) * w + x];
  }
  const T& operator()(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) const {
    return data[((i * c + ch) * h + y) * w + x];
  }
};

// Stacks single-channel maps into an (N, 1, H, W) tensor; all maps must share a shape.
template <class T, class U>
Tensor4<T> stack_maps(const std::vector<const Array2D<U>*>& maps);
// Channel 0 of sample i as a 2D map.
template <class T, class U>
Array2D<U> unstack_map(const Tensor4<T>& t, std::size_t i);

// Reflection padding (edge sample not repeated), `before` rows/cols on the
// leading side and `after` on the trailing side.
template <class T>
Tensor4<T> reflect_pad(const Tensor4<T>& in, std::size_t before, std::size_t after);
template <class T>
Tensor4<T> crop(const Tensor4<T>& in, std::size_t offset, std::size_t size);

}  // namespace nfsr
