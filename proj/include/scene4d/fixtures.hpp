// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scene4d/camera.hpp"
#include "scene4d/error.hpp"
#include "scene4d/flow.hpp"
#include "scene4d/grid.hpp"
#include "scene4d/motion3d.hpp"
#include "scene4d/pcrender.hpp"
#include "scene4d/pointcloud.hpp"
#include "scene4d/trajectory.hpp"

namespace scene4d {

/// Synthetic test scenes built from fronto-parallel textured slabs with an
/// analytically known motion field. Per-view ground-truth flows are exact by
/// construction: each pixel ray is cast against the slabs and the visible
/// point's displacement is projected back into the view.
struct FixtureScene {
  std::string id;
  Image image;
  Raster depth;
  MotionMask mask;
  CameraModel base_camera;
  std::vector<CameraModel> cameras;  // pose 0 is the base (identity) view
  std::vector<FlowField2D> flows;    // per-view ground-truth flows
  PointCloud cloud;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&)> motion;  // world point -> displacement
  double loop_period = 1.0;
  uint64_t seed = 0;
};

namespace detail {

struct Slab {
  double z;
  double x0, x1, y0, y1;  // world extent on the z-plane
  int texture_id;
};

inline double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// 1 well inside the rect, cubic taper to 0 at the rect boundary over the
/// given margins. Zero outside.
inline double interior_window(const Eigen::Vector3d& p, double x0, double x1, double y0, double y1, double mx,
                              double my) {
  return smoothstep01((p.x() - x0) / mx) * smoothstep01((x1 - p.x()) / mx) * smoothstep01((p.y() - y0) / my) *
         smoothstep01((y1 - p.y()) / my);
}

inline uint64_t hash_u64(uint64_t v) {
  v += 0x9e3779b97f4a7c15ull;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
  return v ^ (v >> 31);
}

inline double hash_noise(long xi, long yi, uint64_t seed) {
  const uint64_t h = hash_u64(static_cast<uint64_t>(xi) * 0x100000001b3ull ^ static_cast<uint64_t>(yi) ^
                              (seed << 32));
  return (h >> 11) * 0x1.0p-53;
}

/// Value noise over world coordinates, so the texture is attached to the
/// surface and stays consistent across views.
inline double value_noise(double x, double y, double cell, uint64_t seed) {
  const double gx = x / cell, gy = y / cell;
  const long x0 = static_cast<long>(std::floor(gx)), y0 = static_cast<long>(std::floor(gy));
  const double fx = gx - x0, fy = gy - y0;
  const double a = hash_noise(x0, y0, seed), b = hash_noise(x0 + 1, y0, seed);
  const double c = hash_noise(x0, y0 + 1, seed), d = hash_noise(x0 + 1, y0 + 1, seed);
  const double sx = smoothstep01(fx), sy = smoothstep01(fy);
  return (a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy;
}

inline Color slab_color(int texture_id, const Eigen::Vector3d& p, uint64_t seed) {
  switch (texture_id) {
    case 0: {  // rippled water-like bands
      const double n = value_noise(p.x(), p.y(), 0.45, seed ^ 0xA0);
      const double band = 0.5 + 0.35 * std::sin(2.0 * M_PI * (p.y() / 1.1 + 0.3 * n));
      return Color(0.15 + 0.2 * n, 0.35 + 0.35 * band, 0.55 + 0.3 * band);
    }
    case 1: {  // rocky high-frequency texture
      const double n1 = value_noise(p.x(), p.y(), 0.3, seed ^ 0xB1);
      const double n2 = value_noise(p.x(), p.y(), 0.9, seed ^ 0xB2);
      const double v = 0.25 + 0.5 * (0.6 * n1 + 0.4 * n2);
      return Color(v, 0.85 * v, 0.7 * v);
    }
    case 2: {  // streaky vertical texture
      const double streak = 0.5 + 0.4 * std::sin(2.0 * M_PI * p.x() / 0.22);
      const double n = value_noise(p.x(), p.y(), 0.25, seed ^ 0xC3);
      const double v = 0.55 + 0.3 * streak + 0.15 * n;
      return Color(0.8 * v, 0.9 * v, v);
    }
    default: {  // distant matte backdrop
      const double n = value_noise(p.x(), p.y(), 1.3, seed ^ 0xD4);
      return Color(0.45 + 0.25 * n, 0.4 + 0.25 * n, 0.5 + 0.2 * n);
    }
  }
}

/// Nearest slab hit along the pixel ray. Rigs are translation-only, so the
/// ray direction equals the camera-space pixel direction.
inline std::optional<std::pair<std::size_t, Eigen::Vector3d>> raycast(const std::vector<Slab>& slabs,
                                                                      const Eigen::Vector3d& center, double u,
                                                                      double v, const CameraIntrinsics& k) {
  const Eigen::Vector3d dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  for (std::size_t s = 0; s < slabs.size(); ++s) {  // slabs sorted by z ascending
    const double t = slabs[s].z - center.z();
    if (t <= kZNear) continue;
    const Eigen::Vector3d p = center + t * dir;
    if (p.x() >= slabs[s].x0 && p.x() <= slabs[s].x1 && p.y() >= slabs[s].y0 && p.y() <= slabs[s].y1)
      return std::make_pair(s, p);
  }
  return std::nullopt;
}

struct FixtureSpec {
  int width, height;
  std::vector<Slab> slabs;                                        // sorted by z ascending
  std::function<Eigen::Vector3d(const Eigen::Vector3d&)> motion;  // applies to the visible point
  int n_views;
  double baseline;
};

inline FixtureScene build_fixture(const std::string& id, const FixtureSpec& spec, uint64_t seed) {
  FixtureScene scene;
  scene.id = id;
  scene.seed = seed;
  scene.base_camera.intrinsics = default_intrinsics(spec.width, spec.height);
  scene.motion = spec.motion;

  const auto traj = make_trajectory(TrajectoryPreset::kLateral, spec.n_views, spec.baseline);
  for (const auto& pose : traj.poses) {
    CameraModel cam = scene.base_camera;
    cam.pose = pose;
    scene.cameras.push_back(cam);
  }

  scene.image = Image(spec.width, spec.height, Color::Zero());
  scene.depth = Raster(spec.width, spec.height, kInvalidDepth);
  scene.mask = MotionMask{Raster(spec.width, spec.height, 0.0)};
  const Eigen::Vector3d base_center = Eigen::Vector3d::Zero();
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const auto hit = raycast(spec.slabs, base_center, x, y, scene.base_camera.intrinsics);
      if (!hit) continue;
      scene.depth.at(x, y) = spec.slabs[hit->first].z;
      scene.image.at(x, y) = slab_color(spec.slabs[hit->first].texture_id, hit->second, seed);
      if (spec.motion(hit->second).squaredNorm() > 0.0) scene.mask.mask.at(x, y) = 1.0;
    }
  }
  scene.cloud = unproject(scene.image, scene.depth, scene.base_camera);

  for (const auto& cam : scene.cameras) {
    FlowField2D flow(spec.width, spec.height);
    const Eigen::Vector3d center = cam.pose.center();
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const auto hit = raycast(spec.slabs, center, x, y, cam.intrinsics);
        if (!hit) {
          flow.valid.at(x, y) = 0;
          continue;
        }
        const Eigen::Vector3d delta = spec.motion(hit->second);
        if (delta.squaredNorm() == 0.0) continue;  // flow stays zero
        const auto end = project_point(hit->second + delta, cam);
        if (!end) {
          flow.valid.at(x, y) = 0;
          continue;
        }
        flow.u.at(x, y) = end->x() - x;
        flow.v.at(x, y) = end->y() - y;
      }
    }
    scene.flows.push_back(std::move(flow));
  }
  return scene;
}

}  // namespace detail

inline const std::vector<std::string>& fixture_scene_ids() {
  static const std::vector<std::string> ids{"plane-wave", "two-layer", "waterfall"};
  return ids;
}

/// plane-wave: a textured water plane with an in-plane sinusoidal wave field
/// over a wide band. two-layer: foreground block over a distant backdrop with
/// a drifting band on the backdrop (two depth modes). waterfall: a bright
/// streaky stripe in front of a rock face, falling fast and uniformly.
inline FixtureScene make_fixture(const std::string& scene_id, int n_views, double baseline, uint64_t seed = 0) {
  using detail::interior_window;
  if (scene_id == "plane-wave") {
    detail::FixtureSpec spec;
    spec.width = 64;
    spec.height = 64;
    const double z = 4.0;
    spec.slabs = {{z, -3.5, 3.5, -3.5, 3.5, 0}};
    // mask band rows [12, 52), full width, in world units on the plane
    const double x0 = -2.0, x1 = 2.0, y0 = (12 - 32) / 64.0 * z, y1 = (52 - 32) / 64.0 * z;
    const double margin = 10.0 * z / 64.0;  // 10 px interior taper
    spec.motion = [=](const Eigen::Vector3d& p) -> Eigen::Vector3d {
      const double w = interior_window(p, x0, x1, y0, y1, margin, margin);
      if (w == 0.0) return Eigen::Vector3d::Zero();
      return w * Eigen::Vector3d(0.035 * std::sin(2.0 * M_PI * p.y() / 3.0),
                                 0.02 * std::cos(2.0 * M_PI * p.x() / 3.5), 0.0);
    };
    spec.n_views = n_views;
    spec.baseline = baseline;
    return detail::build_fixture(scene_id, spec, seed);
  }
  if (scene_id == "two-layer") {
    detail::FixtureSpec spec;
    spec.width = 64;
    spec.height = 64;
    const double z_bg = 6.0, z_fg = 3.0;
    // foreground block: base-view cols [16, 48), rows [28, 64)
    spec.slabs = {{z_fg, (16 - 32) / 64.0 * z_fg, (48 - 32) / 64.0 * z_fg, (28 - 32) / 64.0 * z_fg, 1.6, 1},
                  {z_bg, -5.0, 5.0, -5.0, 5.0, 3}};
    // drifting band on the backdrop, rows [6, 24)
    const double y0 = (6 - 32) / 64.0 * z_bg, y1 = (24 - 32) / 64.0 * z_bg;
    const double x0 = -2.6, x1 = 2.6;
    const double margin = 8.0 * z_bg / 64.0;
    spec.motion = [=](const Eigen::Vector3d& p) -> Eigen::Vector3d {
      if (std::abs(p.z() - z_bg) > 1e-9) return Eigen::Vector3d::Zero();
      const double w = interior_window(p, x0, x1, y0, y1, margin, margin);
      if (w == 0.0) return Eigen::Vector3d::Zero();
      return w * Eigen::Vector3d(0.05, 0.015, 0.0);
    };
    spec.n_views = n_views;
    spec.baseline = baseline;
    return detail::build_fixture(scene_id, spec, seed);
  }
  if (scene_id == "waterfall") {
    detail::FixtureSpec spec;
    spec.width = 64;
    spec.height = 96;
    const double z_fall = 4.6, z_cliff = 5.0;
    const double fx = 96.0;  // default intrinsics of a 64x96 image
    // fall stripe: base-view cols [20, 44), rows [10, 86)
    const double fx0 = (20 - 32) / fx * z_fall, fx1 = (44 - 32) / fx * z_fall;
    const double fy0 = (10 - 48) / fx * z_fall, fy1 = (86 - 48) / fx * z_fall;
    spec.slabs = {{z_fall, fx0, fx1, fy0, fy1, 2}, {z_cliff, -4.0, 4.0, -4.0, 4.0, 1}};
    const double mx = 5.0 * z_fall / fx, my = 8.0 * z_fall / fx;
    spec.motion = [=](const Eigen::Vector3d& p) -> Eigen::Vector3d {
      if (std::abs(p.z() - z_fall) > 1e-9) return Eigen::Vector3d::Zero();
      const double w = interior_window(p, fx0, fx1, fy0, fy1, mx, my);
      if (w == 0.0) return Eigen::Vector3d::Zero();
      return w * Eigen::Vector3d(0.0, 0.15, 0.0);
    };
    spec.n_views = n_views;
    spec.baseline = baseline;
    return detail::build_fixture(scene_id, spec, seed);
  }
  throw UnknownScene("unknown fixture scene: " + scene_id);
}

inline FixtureScene make_fixture(const std::string& scene_id, uint64_t seed = 0) {
  if (scene_id == "plane-wave") return make_fixture(scene_id, 8, 0.5, seed);
  if (scene_id == "two-layer") return make_fixture(scene_id, 8, 0.3, seed);
  if (scene_id == "waterfall") return make_fixture(scene_id, 8, 0.4, seed);
  throw UnknownScene("unknown fixture scene: " + scene_id);
}

/// Ground-truth displacement for each animated cloud point (mask binarized
/// at 0.5), in cloud-point order.
inline MotionField3D fixture_motion_field(const FixtureScene& scene) {
  MotionField3D field = make_motion_field(scene.cloud, scene.mask);
  for (std::size_t i = 0; i < field.size(); ++i)
    field.displaced[i] = field.base[i] + scene.motion(field.base[i]);
  return field;
}

}  // namespace scene4d
