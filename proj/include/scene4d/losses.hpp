// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "scene4d/error.hpp"
#include "scene4d/grid.hpp"
#include "scene4d/ssim.hpp"

namespace scene4d {

struct PhotometricResult {
  double loss = 0.0;
  double l1 = 0.0;
  double l_ssim = 0.0;  // 1 - SSIM
  Image gradient;       // dL/d(rendered)
};

/// L1/SSIM blend: L1 + lambda * (L_SSIM - L1) with L_SSIM = 1 - SSIM,
/// evaluated as (1 - lambda) * L1 + lambda * L_SSIM so the lambda = 0 and
/// lambda = 1 endpoints reduce exactly. L1 averages over valid pixels and
/// channels; SSIM uses windows fully inside the valid mask.
inline PhotometricResult photometric_loss(const Image& rendered, const Image& target, const BoolGrid& valid,
                                          double lambda) {
  if (!rendered.same_size(target) || !rendered.same_size(valid))
    throw DimensionMismatch("photometric_loss: image dimensions disagree");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("photometric_loss: lambda must be in [0, 1]");

  std::size_t n_valid = 0;
  for (const auto v : valid) n_valid += (v != 0);
  if (n_valid == 0) throw EmptyValidMask("photometric_loss: no valid pixel");

  PhotometricResult out;
  out.gradient = Image(rendered.width(), rendered.height(), Color::Zero());
  const double inv = 1.0 / (3.0 * static_cast<double>(n_valid));
  for (int y = 0; y < rendered.height(); ++y) {
    for (int x = 0; x < rendered.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const Color diff = rendered.at(x, y) - target.at(x, y);
      out.l1 += diff.cwiseAbs().sum() * inv;
      if (lambda < 1.0) {
        for (int ch = 0; ch < 3; ++ch) {
          const double s = diff[ch] > 0 ? 1.0 : (diff[ch] < 0 ? -1.0 : 0.0);
          out.gradient.at(x, y)[ch] = (1.0 - lambda) * s * inv;
        }
      }
    }
  }

  if (lambda > 0.0) {
    Image ssim_grad;
    const double mean_ssim = ssim(rendered, target, &valid, &ssim_grad);
    out.l_ssim = 1.0 - mean_ssim;
    for (int y = 0; y < rendered.height(); ++y)
      for (int x = 0; x < rendered.width(); ++x)
        out.gradient.at(x, y) += -lambda * ssim_grad.at(x, y);
  }

  out.loss = (1.0 - lambda) * out.l1 + lambda * out.l_ssim;
  return out;
}

}  // namespace scene4d
