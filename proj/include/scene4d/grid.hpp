// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace scene4d {

using Color = Eigen::Vector3d;

/// Dense row-major 2D container indexed as (x, y) with x = column, y = row.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && x < width_ && y >= 0 && y < height_; }

  T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_size(const Grid<U>& other) const {
    return same_size(other.width(), other.height());
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Raster = Grid<double>;      // depth maps, masks, flow channels
using Image = Grid<Color>;        // RGB in [0,1]
using BoolGrid = Grid<uint8_t>;   // 0/1 flags

/// Bilinear sample of a scalar raster at a real-valued position. Corners with
/// zero weight are not required to be inside the grid; returns false when a
/// contributing corner is out of bounds or rejected by `corner_ok`.
template <typename AcceptFn>
inline bool bilinear_sample(const Raster& r, double x, double y, double& out, AcceptFn corner_ok) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int cx[4] = {x0, x0 + 1, x0, x0 + 1};
  const int cy[4] = {y0, y0, y0 + 1, y0 + 1};
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    if (!r.contains(cx[k], cy[k]) || !corner_ok(cx[k], cy[k])) return false;
    acc += w[k] * r.at(cx[k], cy[k]);
  }
  out = acc;
  return true;
}

inline bool bilinear_sample(const Raster& r, double x, double y, double& out) {
  return bilinear_sample(r, x, y, out, [](int, int) { return true; });
}

}  // namespace scene4d
