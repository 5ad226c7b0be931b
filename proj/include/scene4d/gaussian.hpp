// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "scene4d/error.hpp"
#include "scene4d/pointcloud.hpp"

namespace scene4d {

inline constexpr double kMinScale = 1e-6;
inline constexpr double kMaxScale = 1e3;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Anisotropic, view-independent Gaussian primitive. Scales live in the log
/// domain and opacity in the logit domain so updates stay unconstrained.
struct Gaussian {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  Color color = Color::Zero();

  Eigen::Vector3d scale() const { return log_scale.array().exp(); }
  double opacity() const { return sigmoid(opacity_logit); }

  /// World-space covariance R diag(exp(2s)) R^T.
  Eigen::Matrix3d covariance() const {
    const Eigen::Matrix3d r = rotation.normalized().toRotationMatrix();
    return r * (2.0 * log_scale).array().exp().matrix().asDiagonal() * r.transpose();
  }

  void clamp_and_normalize() {
    // renormalize only on real drift; a no-op update must stay bit-identical
    if (std::abs(rotation.squaredNorm() - 1.0) > 1e-12) rotation.normalize();
    const double lo = std::log(kMinScale), hi = std::log(kMaxScale);
    for (int k = 0; k < 3; ++k) log_scale[k] = std::clamp(log_scale[k], lo, hi);
  }
};

struct GaussianCloud {
  std::vector<Gaussian> gaussians;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
  Gaussian& operator[](std::size_t i) { return gaussians[i]; }
  const Gaussian& operator[](std::size_t i) const { return gaussians[i]; }
};

/// Radius of the bounding sphere around the position centroid.
inline double scene_extent(const std::vector<Eigen::Vector3d>& positions) {
  if (positions.empty()) return 0.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : positions) centroid += p;
  centroid /= static_cast<double>(positions.size());
  double r2 = 0.0;
  for (const auto& p : positions) r2 = std::max(r2, (p - centroid).squaredNorm());
  return std::sqrt(r2);
}

inline double scene_extent(const PointCloud& cloud) { return scene_extent(cloud.positions); }

inline double scene_extent(const GaussianCloud& cloud) {
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(cloud.size());
  for (const auto& g : cloud.gaussians) positions.push_back(g.mean);
  return scene_extent(positions);
}

namespace detail {

/// Mean distance to the 3 nearest neighbours, brute force.
inline std::vector<double> knn_mean_distance(const std::vector<Eigen::Vector3d>& positions) {
  const std::size_t n = positions.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = (positions[j] - positions[i]).squaredNorm();
      if (d2 < best[2]) {
        best[2] = d2;
        if (best[2] < best[1]) std::swap(best[1], best[2]);
        if (best[1] < best[0]) std::swap(best[0], best[1]);
      }
    }
    out[i] = (std::sqrt(best[0]) + std::sqrt(best[1]) + std::sqrt(best[2])) / 3.0;
  }
  return out;
}

}  // namespace detail

/// One Gaussian per cloud point: isotropic footprint from the mean 3-NN
/// distance, identity rotation, opacity 0.9. Degenerate clouds (< 4 points)
/// fall back to 1% of the scene extent.
inline GaussianCloud init_from_pointcloud(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloud("init_from_pointcloud: empty cloud");
  GaussianCloud out;
  out.gaussians.resize(cloud.size());
  const double extent = scene_extent(cloud);
  const double fallback = std::max(0.01 * extent, kMinScale * 10.0);
  std::vector<double> knn;
  if (cloud.size() >= 4) knn = detail::knn_mean_distance(cloud.positions);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Gaussian& g = out.gaussians[i];
    g.mean = cloud.positions[i];
    g.color = cloud.colors[i];
    g.opacity_logit = logit(0.9);
    const double s = (cloud.size() >= 4 && knn[i] > 0.0) ? knn[i] : fallback;
    g.log_scale.setConstant(std::log(std::clamp(s, kMinScale, kMaxScale)));
  }
  return out;
}

}  // namespace scene4d
