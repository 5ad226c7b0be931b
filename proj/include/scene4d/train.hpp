// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scene4d/error.hpp"
#include "scene4d/gaussian.hpp"
#include "scene4d/losses.hpp"
#include "scene4d/pcrender.hpp"
#include "scene4d/rasterizer.hpp"
#include "scene4d/rng.hpp"

namespace scene4d {

/// Flat Adam state over an arbitrary parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update; `lr` may vary per call, `rate_scale` per parameter.
  void step(std::vector<double>& params, const std::vector<double>& grad, const std::vector<double>& rate_scale,
            double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr * rate_scale[i] * mhat / (std::sqrt(vhat) + eps_);
    }
  }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainView {
  RenderedView view;   // target color + hole mask (holes excluded from the loss)
  CameraModel camera;
};

struct StaticTrainConfig {
  int steps = 300;
  double lambda = 0.2;
  uint64_t seed = 0;
  // per-group Adam rates; means scale with the scene extent
  double lr_mean = 1.6e-4;
  double lr_rotation = 1e-3;
  double lr_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
};

struct StaticTrainResult {
  GaussianCloud cloud;
  std::vector<double> step_loss;
  double initial_loss = 0.0;  // mean photometric loss over all views
  double final_loss = 0.0;
};

/// Steps with a loss below this are treated as converged and skipped; the L1
/// subgradient has constant magnitude, so stepping on rounding-level residuals
/// would walk the parameters away from an exact fixed point.
inline constexpr double kConvergedLoss = 1e-12;

namespace detail {

inline constexpr int kGaussianParams = 14;  // 3 mean + 4 quat + 3 log-scale + 1 opacity + 3 color

inline void pack_params(const GaussianCloud& cloud, std::vector<double>& p) {
  p.resize(cloud.size() * kGaussianParams);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Gaussian& g = cloud.gaussians[i];
    double* q = &p[i * kGaussianParams];
    q[0] = g.mean.x(); q[1] = g.mean.y(); q[2] = g.mean.z();
    q[3] = g.rotation.w(); q[4] = g.rotation.x(); q[5] = g.rotation.y(); q[6] = g.rotation.z();
    q[7] = g.log_scale.x(); q[8] = g.log_scale.y(); q[9] = g.log_scale.z();
    q[10] = g.opacity_logit;
    q[11] = g.color.x(); q[12] = g.color.y(); q[13] = g.color.z();
  }
}

inline void unpack_params(const std::vector<double>& p, GaussianCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Gaussian& g = cloud.gaussians[i];
    const double* q = &p[i * kGaussianParams];
    g.mean = {q[0], q[1], q[2]};
    g.rotation = Eigen::Quaterniond(q[3], q[4], q[5], q[6]);
    g.log_scale = {q[7], q[8], q[9]};
    g.opacity_logit = q[10];
    g.color = {q[11], q[12], q[13]};
    g.clamp_and_normalize();
  }
}

inline void pack_grads(const std::vector<GaussianGrads>& grads, std::vector<double>& g) {
  g.resize(grads.size() * kGaussianParams);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double* q = &g[i * kGaussianParams];
    q[0] = grads[i].mean.x(); q[1] = grads[i].mean.y(); q[2] = grads[i].mean.z();
    q[3] = grads[i].rotation[0]; q[4] = grads[i].rotation[1];
    q[5] = grads[i].rotation[2]; q[6] = grads[i].rotation[3];
    q[7] = grads[i].log_scale.x(); q[8] = grads[i].log_scale.y(); q[9] = grads[i].log_scale.z();
    q[10] = grads[i].opacity_logit;
    q[11] = grads[i].color.x(); q[12] = grads[i].color.y(); q[13] = grads[i].color.z();
  }
}

}  // namespace detail

/// Mean photometric loss over all training views (holes excluded).
inline double evaluate_views(const GaussianCloud& cloud, const std::vector<TrainView>& views, double lambda) {
  double total = 0.0;
  for (const auto& tv : views) {
    BoolGrid valid(tv.view.width(), tv.view.height(), 1);
    for (int y = 0; y < tv.view.height(); ++y)
      for (int x = 0; x < tv.view.width(); ++x) valid.at(x, y) = tv.view.hole_mask.at(x, y) ? 0 : 1;
    const auto rendered = rasterize(cloud, tv.camera);
    total += photometric_loss(rendered.color, tv.view.color, valid, lambda).loss;
  }
  return total / static_cast<double>(views.size());
}

/// Stage-1 optimization of the static Gaussians against the rendered
/// multi-view targets, one seeded random view per step.
inline StaticTrainResult optimize_static(const GaussianCloud& cloud, const std::vector<TrainView>& views,
                                         const StaticTrainConfig& config) {
  if (views.empty()) throw InvalidArgument("optimize_static: need at least one view");
  if (config.steps < 1) throw InvalidArgument("optimize_static: steps must be >= 1");
  StaticTrainResult result;
  result.cloud = cloud;
  result.initial_loss = evaluate_views(result.cloud, views, config.lambda);

  const double extent = std::max(scene_extent(result.cloud), 1e-9);
  std::vector<double> rate(cloud.size() * detail::kGaussianParams);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double* q = &rate[i * detail::kGaussianParams];
    q[0] = q[1] = q[2] = config.lr_mean * extent;
    q[3] = q[4] = q[5] = q[6] = config.lr_rotation;
    q[7] = q[8] = q[9] = config.lr_scale;
    q[10] = config.lr_opacity;
    q[11] = q[12] = q[13] = config.lr_color;
  }

  std::vector<double> params, grads_flat;
  detail::pack_params(result.cloud, params);
  Adam adam(params.size());
  Rng rng(config.seed);

  std::vector<BoolGrid> valid_masks;
  for (const auto& tv : views) {
    BoolGrid valid(tv.view.width(), tv.view.height(), 1);
    for (int y = 0; y < tv.view.height(); ++y)
      for (int x = 0; x < tv.view.width(); ++x) valid.at(x, y) = tv.view.hole_mask.at(x, y) ? 0 : 1;
    valid_masks.push_back(std::move(valid));
  }

  for (int step = 0; step < config.steps; ++step) {
    const std::size_t v = rng.uniform_index(views.size());
    const auto rendered = rasterize(result.cloud, views[v].camera);
    const auto pr = photometric_loss(rendered.color, views[v].view.color, valid_masks[v], config.lambda);
    if (!std::isfinite(pr.loss))
      throw NonFiniteLoss("optimize_static: non-finite loss at step " + std::to_string(step));
    result.step_loss.push_back(pr.loss);
    if (pr.loss < kConvergedLoss) continue;
    const auto grads = backward_rasterize(result.cloud, views[v].camera, pr.gradient);
    detail::pack_grads(grads, grads_flat);
    adam.step(params, grads_flat, rate, 1.0);
    detail::unpack_params(params, result.cloud);
    detail::pack_params(result.cloud, params);  // keep the vector consistent with clamping
  }

  result.final_loss = evaluate_views(result.cloud, views, config.lambda);
  return result;
}

}  // namespace scene4d
