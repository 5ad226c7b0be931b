// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <optional>

#include "scene4d/error.hpp"

namespace scene4d {

/// Camera-space points with z at or below this bound are treated as clipped.
inline constexpr double kZNear = 1e-4;

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw InvalidArgument("intrinsics: focal lengths must be positive");
    if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
      throw InvalidArgument("intrinsics: principal point outside image");
  }
};

/// fx = fy = max(width, height), principal point at the image center.
inline CameraIntrinsics default_intrinsics(int width, int height) {
  const double f = static_cast<double>(std::max(width, height));
  return {f, f, width / 2.0, height / 2.0, width, height};
}

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate(double tol = 1e-9) const {
    const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
    if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
      throw InvalidArgument("pose: rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol)
      throw InvalidArgument("pose: rotation determinant is not +1");
  }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation * world + translation; }
  Eigen::Vector3d to_world(const Eigen::Vector3d& cam) const { return rotation.transpose() * (cam - translation); }
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  /// Pose composition: applies `this` after `first`.
  CameraPose compose_after(const CameraPose& first) const {
    return {rotation * first.rotation, rotation * first.translation + translation};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static CameraPose from_matrix(const Eigen::Matrix4d& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }
};

struct CameraModel {
  CameraIntrinsics intrinsics;
  CameraPose pose;

  void validate() const {
    intrinsics.validate();
    pose.validate();
  }
};

/// Pinhole projection of a camera-space point. No clipping check.
inline Eigen::Vector2d project_camera_point(const Eigen::Vector3d& cam, const CameraIntrinsics& k) {
  return {k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy};
}

/// Projects a world point; empty when the point is clipped at kZNear.
inline std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& world, const CameraModel& cam,
                                                    double* cam_depth = nullptr) {
  const Eigen::Vector3d c = cam.pose.to_camera(world);
  if (cam_depth) *cam_depth = c.z();
  if (c.z() <= kZNear) return std::nullopt;
  return project_camera_point(c, cam.intrinsics);
}

/// Lifts pixel (u, v) with camera-space depth d back into world coordinates.
inline Eigen::Vector3d unproject_pixel(double u, double v, double depth, const CameraModel& cam) {
  const Eigen::Vector3d c(depth * (u - cam.intrinsics.cx) / cam.intrinsics.fx,
                          depth * (v - cam.intrinsics.cy) / cam.intrinsics.fy, depth);
  return cam.pose.to_world(c);
}

/// d(pixel)/d(world point), a 2x3 matrix:
///   [fx/z, 0, -fx*x/z^2; 0, fy/z, -fy*y/z^2] * R
/// with (x, y, z) the camera-space point.
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& world, const CameraModel& cam) {
  const Eigen::Vector3d c = cam.pose.to_camera(world);
  if (c.z() <= kZNear) throw DegenerateDepth("projection_jacobian: point at or behind the near plane");
  const double z2 = c.z() * c.z();
  Eigen::Matrix<double, 2, 3> j;
  j << cam.intrinsics.fx / c.z(), 0.0, -cam.intrinsics.fx * c.x() / z2,
       0.0, cam.intrinsics.fy / c.z(), -cam.intrinsics.fy * c.y() / z2;
  return j * cam.pose.rotation;
}

}  // namespace scene4d
