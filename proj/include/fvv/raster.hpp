#pragma once

#include "fvv/common.hpp"

#include <algorithm>
#include <cassert>
#include <type_traits>
#include <cstdint>
#include <vector>

namespace fvv {

/// Dense row-major 2D grid.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, const T &fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T &operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T &operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Raster<U> &other) const {
    return same_shape(other.width(), other.height());
  }

  std::vector<T> &data() { return data_; }
  const std::vector<T> &data() const { return data_; }

  bool operator==(const Raster &) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Raster<std::uint8_t>;
using ImageRgb = Raster<Color>;
using ScalarMap = Raster<double>;

/// Bilinear tap set for a continuous pixel coordinate; coordinates are clamped
/// to the pixel-center lattice so the image footprint [-0.5, w-0.5] is valid.
struct BilinearTaps {
  int x0, y0, x1, y1;
  double wx, wy;

  double weight(int corner) const {
    switch (corner) {
      case 0: return (1.0 - wx) * (1.0 - wy);
      case 1: return wx * (1.0 - wy);
      case 2: return (1.0 - wx) * wy;
      default: return wx * wy;
    }
  }
  int x(int corner) const { return (corner & 1) ? x1 : x0; }
  int y(int corner) const { return (corner & 2) ? y1 : y0; }
};

inline BilinearTaps bilinear_taps(int width, int height, const Vec2 &p) {
  const double x = std::clamp(p.x(), 0.0, static_cast<double>(width - 1));
  const double y = std::clamp(p.y(), 0.0, static_cast<double>(height - 1));
  BilinearTaps t;
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  t.x1 = std::min(t.x0 + 1, width - 1);
  t.y1 = std::min(t.y0 + 1, height - 1);
  t.wx = x - t.x0;
  t.wy = y - t.y0;
  return t;
}

template <typename T>
T zero_value() {
  if constexpr (std::is_arithmetic_v<T>)
    return T{0};
  else
    return T::Zero();
}

template <typename T>
void accumulate(T &acc, const T &value, double weight) {
  if constexpr (std::is_arithmetic_v<T>)
    acc += static_cast<T>(weight * value);
  else
    acc += value * static_cast<typename T::Scalar>(weight);
}

/// Plain bilinear sample; pixel must be inside the image footprint.
template <typename T>
T sample_bilinear(const Raster<T> &img, const Vec2 &p) {
  const auto taps = bilinear_taps(img.width(), img.height(), p);
  T acc = zero_value<T>();
  for (int c = 0; c < 4; ++c) {
    const double w = taps.weight(c);
    if (w != 0.0) accumulate(acc, img(taps.x(c), taps.y(c)), w);
  }
  return acc;
}

/// Bilinear sample over the taps accepted by `valid`, renormalizing weights.
/// Taps with zero weight never contribute. Returns false if no accepted tap
/// carries weight.
template <typename T, typename Valid>
bool sample_bilinear_valid(const Raster<T> &img, const Vec2 &p, Valid &&valid, T &out) {
  const auto taps = bilinear_taps(img.width(), img.height(), p);
  double total = 0.0;
  T acc = zero_value<T>();
  for (int c = 0; c < 4; ++c) {
    const double w = taps.weight(c);
    if (w == 0.0 || !valid(taps.x(c), taps.y(c))) continue;
    total += w;
    accumulate(acc, img(taps.x(c), taps.y(c)), w);
  }
  if (total <= 0.0) return false;
  if (total == 1.0) {
    out = acc;
  } else {
    out = zero_value<T>();
    accumulate(out, acc, 1.0 / total);
  }
  return true;
}

}  // namespace fvv
