// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "scene4d/error.hpp"
#include "scene4d/grid.hpp"

namespace scene4d {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline const std::array<double, kSsimWindow * kSsimWindow>& ssim_weights() {
  static const auto weights = [] {
    std::array<double, kSsimWindow * kSsimWindow> w{};
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x) {
        const double g = std::exp(-(x * x + y * y) / (2.0 * kSsimSigma * kSsimSigma));
        w[(y + r) * kSsimWindow + (x + r)] = g;
        sum += g;
      }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return weights;
}

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov;
};

template <typename GetA, typename GetB>
inline WindowStats window_stats(int cx, int cy, GetA a, GetB b) {
  const auto& w = ssim_weights();
  const int r = kSsimWindow / 2;
  WindowStats s{0, 0, 0, 0, 0};
  int k = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx, ++k) {
      const double va = a(cx + dx, cy + dy), vb = b(cx + dx, cy + dy);
      s.mu_a += w[k] * va;
      s.mu_b += w[k] * vb;
      s.var_a += w[k] * va * va;
      s.var_b += w[k] * vb * vb;
      s.cov += w[k] * va * vb;
    }
  }
  s.var_a -= s.mu_a * s.mu_a;
  s.var_b -= s.mu_b * s.mu_b;
  s.cov -= s.mu_a * s.mu_b;
  return s;
}

}  // namespace detail

/// Mean SSIM per channel over 11x11 Gaussian windows (sigma 1.5), averaged
/// across channels. Only windows fully inside the image (and, when given,
/// fully inside the valid mask) contribute. Optionally accumulates the
/// gradient of the mean SSIM with respect to image `a`.
inline double ssim(const Image& a, const Image& b, const BoolGrid* valid = nullptr, Image* gradient = nullptr) {
  if (!a.same_size(b)) throw DimensionMismatch("ssim: image dimensions disagree");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow)
    throw ImageTooSmall("ssim: image smaller than the 11x11 window");
  const int r = kSsimWindow / 2;
  const int w = a.width(), h = a.height();

  // valid window centers
  std::vector<std::pair<int, int>> centers;
  for (int cy = r; cy < h - r; ++cy) {
    for (int cx = r; cx < w - r; ++cx) {
      if (valid) {
        bool ok = true;
        for (int dy = -r; dy <= r && ok; ++dy)
          for (int dx = -r; dx <= r && ok; ++dx) ok = valid->at(cx + dx, cy + dy) != 0;
        if (!ok) continue;
      }
      centers.emplace_back(cx, cy);
    }
  }
  if (centers.empty()) throw EmptyValidMask("ssim: no fully valid window");

  if (gradient) *gradient = Image(w, h, Color::Zero());
  const auto& weights = detail::ssim_weights();
  const double inv_count = 1.0 / (3.0 * static_cast<double>(centers.size()));

  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const auto ga = [&](int x, int y) { return a.at(x, y)[ch]; };
    const auto gb = [&](int x, int y) { return b.at(x, y)[ch]; };
    for (const auto& [cx, cy] : centers) {
      const auto s = detail::window_stats(cx, cy, ga, gb);
      const double a1 = 2.0 * s.mu_a * s.mu_b + kSsimC1;
      const double a2 = 2.0 * s.cov + kSsimC2;
      const double b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kSsimC1;
      const double b2 = s.var_a + s.var_b + kSsimC2;
      const double value = (a1 * a2) / (b1 * b2);
      total += value;
      if (!gradient) continue;

      const double d_mu = 2.0 * s.mu_b * a2 / (b1 * b2) - value * 2.0 * s.mu_a / b1;
      const double d_var = -value / b2;
      const double d_cov = 2.0 * a1 / (b1 * b2);
      int k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++k) {
          const double va = ga(cx + dx, cy + dy), vb = gb(cx + dx, cy + dy);
          gradient->at(cx + dx, cy + dy)[ch] +=
              inv_count * weights[k] * (d_mu + d_var * 2.0 * (va - s.mu_a) + d_cov * (vb - s.mu_b));
        }
      }
    }
  }
  return total * inv_count;
}

}  // namespace scene4d
