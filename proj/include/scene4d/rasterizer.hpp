// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <vector>

#include "scene4d/camera.hpp"
#include "scene4d/gaussian.hpp"
#include "scene4d/grid.hpp"

namespace scene4d {

inline constexpr double kAlphaClamp = 0.99;       // per-splat opacity ceiling
inline constexpr double kAlphaSkip = 1.0 / 255.0; // contributions below are skipped
inline constexpr double kCovLowPass = 0.3;        // 2D covariance floor, px^2

namespace detail {

/// Per-view projected state of one Gaussian, shared by the forward and
/// backward passes.
struct ProjectedSplat {
  std::size_t index;          // into the cloud
  Eigen::Vector3d cam;        // camera-space mean
  Eigen::Vector2d center;     // projected mean, pixels
  Eigen::Matrix2d cov;        // screen-space covariance (low-pass included)
  Eigen::Matrix2d cov_inv;
  double alpha0;              // sigmoid(opacity)
  double cutoff;              // Mahalanobis bound where alpha crosses kAlphaSkip
  int x0, x1, y0, y1;         // inclusive pixel bounds
};

inline Eigen::Matrix<double, 2, 3> camera_jacobian(const Eigen::Vector3d& cam, const CameraIntrinsics& k) {
  const double z2 = cam.z() * cam.z();
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / cam.z(), 0.0, -k.fx * cam.x() / z2,
       0.0, k.fy / cam.z(), -k.fy * cam.y() / z2;
  return j;
}

inline std::vector<ProjectedSplat> prepare_splats(const GaussianCloud& cloud, const CameraModel& camera) {
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  std::vector<ProjectedSplat> splats;
  splats.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Gaussian& g = cloud.gaussians[i];
    const Eigen::Vector3d cam = camera.pose.to_camera(g.mean);
    if (cam.z() <= kZNear) continue;
    const double alpha0 = g.opacity();
    if (alpha0 < kAlphaSkip) continue;

    ProjectedSplat s;
    s.index = i;
    s.cam = cam;
    s.center = project_camera_point(cam, camera.intrinsics);
    const Eigen::Matrix<double, 2, 3> p = camera_jacobian(cam, camera.intrinsics) * camera.pose.rotation;
    s.cov = p * g.covariance() * p.transpose() + kCovLowPass * Eigen::Matrix2d::Identity();
    const double det = s.cov.determinant();
    if (!(det > 0.0)) continue;
    s.cov_inv = s.cov.inverse();
    s.alpha0 = alpha0;
    s.cutoff = 2.0 * std::log(alpha0 / kAlphaSkip);  // alpha >= kAlphaSkip within
    // padded bounding box of the cutoff ellipse; the alpha test is the
    // actual gate, the box only limits the pixel walk
    const double rx = std::sqrt(std::max(0.0, s.cutoff * s.cov(0, 0))) + 1.0;
    const double ry = std::sqrt(std::max(0.0, s.cutoff * s.cov(1, 1))) + 1.0;
    s.x0 = std::max(0, static_cast<int>(std::floor(s.center.x() - rx)));
    s.x1 = std::min(w - 1, static_cast<int>(std::ceil(s.center.x() + rx)));
    s.y0 = std::max(0, static_cast<int>(std::floor(s.center.y() - ry)));
    s.y1 = std::min(h - 1, static_cast<int>(std::ceil(s.center.y() + ry)));
    if (s.x0 > s.x1 || s.y0 > s.y1) continue;
    splats.push_back(s);
  }
  std::sort(splats.begin(), splats.end(), [](const ProjectedSplat& a, const ProjectedSplat& b) {
    if (a.cam.z() != b.cam.z()) return a.cam.z() < b.cam.z();
    return a.index < b.index;
  });
  return splats;
}

inline double splat_alpha(const ProjectedSplat& s, double px, double py, double* mahal = nullptr) {
  const Eigen::Vector2d d(px - s.center.x(), py - s.center.y());
  const double m = d.dot(s.cov_inv * d);
  if (mahal) *mahal = m;
  if (m > s.cutoff) return 0.0;
  return std::min(kAlphaClamp, s.alpha0 * std::exp(-0.5 * m));
}

}  // namespace detail

struct RasterizeResult {
  Image color;
  Raster alpha;  // 1 - final transmittance
};

/// Front-to-back alpha compositing of depth-sorted Gaussians over a black
/// background. Pixel centers sit at integer coordinates.
inline RasterizeResult rasterize(const GaussianCloud& cloud, const CameraModel& camera) {
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  RasterizeResult out{Image(w, h, Color::Zero()), Raster(w, h, 0.0)};
  const auto splats = detail::prepare_splats(cloud, camera);
  Raster transmit(w, h, 1.0);
  for (const auto& s : splats) {
    const Color& c = cloud.gaussians[s.index].color;
    for (int y = s.y0; y <= s.y1; ++y) {
      for (int x = s.x0; x <= s.x1; ++x) {
        const double alpha = detail::splat_alpha(s, x, y);
        if (alpha < kAlphaSkip) continue;
        double& t = transmit.at(x, y);
        out.color.at(x, y) += c * (alpha * t);
        t *= 1.0 - alpha;
      }
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.alpha.at(x, y) = 1.0 - transmit.at(x, y);
  return out;
}

/// Per-Gaussian parameter gradients. The rotation gradient is projected onto
/// the tangent space of the unit quaternion.
struct GaussianGrads {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d::Zero();  // (w, x, y, z)
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  Color color = Color::Zero();
};

/// Adjoint of rasterize for an image-space gradient dL/d(color image).
inline std::vector<GaussianGrads> backward_rasterize(const GaussianCloud& cloud, const CameraModel& camera,
                                                     const Image& grad_color) {
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  if (!grad_color.same_size(w, h)) throw DimensionMismatch("backward_rasterize: gradient image size mismatch");
  const auto splats = detail::prepare_splats(cloud, camera);

  // forward replay: final transmittance and per-pixel contributor lists
  Raster transmit(w, h, 1.0);
  Grid<std::vector<int32_t>> contributors(w, h);
  for (std::size_t k = 0; k < splats.size(); ++k) {
    const auto& s = splats[k];
    for (int y = s.y0; y <= s.y1; ++y) {
      for (int x = s.x0; x <= s.x1; ++x) {
        const double alpha = detail::splat_alpha(s, x, y);
        if (alpha < kAlphaSkip) continue;
        transmit.at(x, y) *= 1.0 - alpha;
        contributors.at(x, y).push_back(static_cast<int32_t>(k));
      }
    }
  }

  // per-pixel back-to-front sweep accumulating dL/d(center, cov, alpha0, color)
  std::vector<Eigen::Vector2d> d_center(splats.size(), Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> d_cov(splats.size(), Eigen::Matrix2d::Zero());
  std::vector<double> d_alpha0(splats.size(), 0.0);
  std::vector<GaussianGrads> grads(cloud.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& list = contributors.at(x, y);
      if (list.empty()) continue;
      const Color& g_pix = grad_color.at(x, y);
      if (g_pix.isZero(0.0)) continue;
      double t_behind = transmit.at(x, y);
      Color accum = Color::Zero();
      double last_alpha = 0.0;
      Color last_color = Color::Zero();
      for (auto it = list.rbegin(); it != list.rend(); ++it) {
        const auto& s = splats[*it];
        double m = 0.0;
        const double alpha = detail::splat_alpha(s, x, y, &m);
        const Color& c = cloud.gaussians[s.index].color;
        const double t_here = t_behind / (1.0 - alpha);  // transmittance in front of this splat
        t_behind = t_here;

        grads[s.index].color += (alpha * t_here) * g_pix;

        accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
        const double d_alpha = g_pix.dot(c - accum) * t_here;
        last_alpha = alpha;
        last_color = c;

        if (alpha >= kAlphaClamp) continue;  // clamped: opacity/shape gradients vanish
        const double gaussian_term = std::exp(-0.5 * m);
        d_alpha0[*it] += gaussian_term * d_alpha;
        const double d_m = -0.5 * s.alpha0 * gaussian_term * d_alpha;
        const Eigen::Vector2d d_vec(x - s.center.x(), y - s.center.y());
        const Eigen::Vector2d sigma_d = s.cov_inv * d_vec;
        d_center[*it] += d_m * (-2.0 * sigma_d);  // d m / d center = -2 cov_inv d
        d_cov[*it] += d_m * (-(sigma_d * sigma_d.transpose()));  // d m / d cov = -inv d d^T inv
      }
    }
  }

  // chain per splat to the 3D parameters
  for (std::size_t k = 0; k < splats.size(); ++k) {
    const auto& s = splats[k];
    const Gaussian& g = cloud.gaussians[s.index];
    GaussianGrads& out = grads[s.index];
    const auto& ki = camera.intrinsics;

    out.opacity_logit += d_alpha0[k] * s.alpha0 * (1.0 - s.alpha0);

    // screen covariance: cov = P Sigma P^T + lowpass, P = J W
    const Eigen::Matrix<double, 2, 3> jproj = detail::camera_jacobian(s.cam, ki);
    const Eigen::Matrix<double, 2, 3> p = jproj * camera.pose.rotation;
    const Eigen::Quaterniond q = g.rotation.normalized();
    const Eigen::Matrix3d rot = q.toRotationMatrix();
    const Eigen::Vector3d scale = g.scale();
    const Eigen::Matrix3d m3 = rot * scale.asDiagonal();          // Sigma = M M^T
    const Eigen::Matrix3d sigma3 = m3 * m3.transpose();

    const Eigen::Matrix2d dc = d_cov[k];
    const Eigen::Matrix3d d_sigma3 = p.transpose() * dc * p;
    const Eigen::Matrix<double, 2, 3> d_p = (dc + dc.transpose()) * p * sigma3;
    const Eigen::Matrix<double, 2, 3> d_j = d_p * camera.pose.rotation.transpose();
    const Eigen::Matrix3d d_m3 = (d_sigma3 + d_sigma3.transpose()) * m3;

    // scales (log domain)
    const Eigen::Matrix3d rt_dm = rot.transpose() * d_m3;
    for (int a = 0; a < 3; ++a) out.log_scale[a] += rt_dm(a, a) * scale[a];

    // rotation via dR/dq, then tangent projection
    const Eigen::Matrix3d d_rot = d_m3 * scale.asDiagonal();
    const double qw = q.w(), qx = q.x(), qy = q.y(), qz = q.z();
    Eigen::Matrix3d dr_dq[4];
    dr_dq[0] << 0, -qz, qy, qz, 0, -qx, -qy, qx, 0;                       // d/dw
    dr_dq[1] << 0, qy, qz, qy, -2 * qx, -qw, qz, qw, -2 * qx;             // d/dx
    dr_dq[2] << -2 * qy, qx, qw, qx, 0, qz, -qw, qz, -2 * qy;             // d/dy
    dr_dq[3] << -2 * qz, -qw, qx, qw, -2 * qz, qy, qx, qy, 0;             // d/dz
    Eigen::Vector4d dq;
    for (int a = 0; a < 4; ++a) dq[a] = 2.0 * (d_rot.array() * dr_dq[a].array()).sum();
    const Eigen::Vector4d qv(qw, qx, qy, qz);
    out.rotation += dq - qv * qv.dot(dq);

    // mean: through the projected center and the Jacobian's own dependence
    Eigen::Vector3d d_cam = jproj.transpose() * d_center[k];
    const double z = s.cam.z(), z2 = z * z, z3 = z2 * z;
    d_cam.x() += d_j(0, 2) * (-ki.fx / z2);
    d_cam.y() += d_j(1, 2) * (-ki.fy / z2);
    d_cam.z() += d_j(0, 0) * (-ki.fx / z2) + d_j(0, 2) * (2.0 * ki.fx * s.cam.x() / z3) +
                 d_j(1, 1) * (-ki.fy / z2) + d_j(1, 2) * (2.0 * ki.fy * s.cam.y() / z3);
    out.mean += camera.pose.rotation.transpose() * d_cam;
  }
  return grads;
}

}  // namespace scene4d
