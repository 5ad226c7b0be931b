// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "scene4d/camera.hpp"
#include "scene4d/error.hpp"
#include "scene4d/grid.hpp"

namespace scene4d {

/// Depth raster values that are non-positive or non-finite mark invalid pixels.
inline bool depth_valid(double d) { return std::isfinite(d) && d > 0.0; }

struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Color> colors;
  std::vector<Eigen::Vector2i> source_pixels;  // pixel of origin, for mask transfer

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
};

/// Lifts every valid-depth pixel of `image` into world space.
inline PointCloud unproject(const Image& image, const Raster& depth, const CameraModel& camera) {
  if (!image.same_size(depth)) throw DimensionMismatch("unproject: image and depth dimensions disagree");
  PointCloud cloud;
  cloud.positions.reserve(image.size());
  cloud.colors.reserve(image.size());
  cloud.source_pixels.reserve(image.size());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double d = depth.at(x, y);
      if (!depth_valid(d)) continue;
      cloud.positions.push_back(unproject_pixel(x, y, d, camera));
      cloud.colors.push_back(image.at(x, y));
      cloud.source_pixels.emplace_back(x, y);
    }
  }
  if (cloud.empty()) throw EmptyCloud("unproject: no valid depth pixel");
  return cloud;
}

struct ProjectedPoint {
  Eigen::Vector2d pixel;
  double cam_depth;
  std::size_t index;
};

/// Projects every cloud point; points clipped at kZNear are omitted.
inline std::vector<ProjectedPoint> project_points(const PointCloud& cloud, const CameraModel& camera) {
  if (cloud.empty()) throw EmptyCloud("project_points: empty cloud");
  std::vector<ProjectedPoint> out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double z = 0;
    if (auto px = project_point(cloud.positions[i], camera, &z)) out.push_back({*px, z, i});
  }
  return out;
}

}  // namespace scene4d
