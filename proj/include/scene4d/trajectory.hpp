// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "scene4d/camera.hpp"
#include "scene4d/error.hpp"

namespace scene4d {

enum class TrajectoryPreset { kZoomIn, kCircular, kLateral, kUpDown };

inline TrajectoryPreset trajectory_preset_from_string(const std::string& s) {
  if (s == "zoom_in") return TrajectoryPreset::kZoomIn;
  if (s == "circular") return TrajectoryPreset::kCircular;
  if (s == "lateral") return TrajectoryPreset::kLateral;
  if (s == "up_down") return TrajectoryPreset::kUpDown;
  throw UnknownPreset("unknown trajectory preset: " + s);
}

inline const char* to_string(TrajectoryPreset p) {
  switch (p) {
    case TrajectoryPreset::kZoomIn: return "zoom_in";
    case TrajectoryPreset::kCircular: return "circular";
    case TrajectoryPreset::kLateral: return "lateral";
    case TrajectoryPreset::kUpDown: return "up_down";
  }
  throw UnknownPreset();
}

struct Trajectory {
  std::vector<CameraPose> poses;
  TrajectoryPreset preset = TrajectoryPreset::kLateral;
};

namespace detail {

/// World-to-camera pose for a camera at `center` looking at `target`,
/// x right / y down / z forward convention.
inline CameraPose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - center).normalized();
  const Eigen::Vector3d world_up(0.0, -1.0, 0.0);
  const Eigen::Vector3d right = forward.cross(world_up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  return {r, -r * center};
}

inline CameraPose translated(const Eigen::Vector3d& center) {
  return {Eigen::Matrix3d::Identity(), -center};
}

/// n symmetric offsets spanning [-amplitude, amplitude]; a single offset is +amplitude.
inline std::vector<double> symmetric_offsets(int n, double amplitude) {
  std::vector<double> o(n);
  if (n == 1) {
    o[0] = amplitude;
  } else {
    for (int i = 0; i < n; ++i) o[i] = -amplitude + 2.0 * amplitude * i / (n - 1);
  }
  return o;
}

}  // namespace detail

/// Deterministic preset camera paths. The first pose is always the identity
/// (the input view); the remaining n_views-1 poses sample the preset path.
/// z_focus is the look-at depth for the circular preset.
inline Trajectory make_trajectory(TrajectoryPreset preset, int n_views, double amplitude, double z_focus = 1.0) {
  if (n_views < 1) throw InvalidArgument("make_trajectory: n_views must be >= 1");
  if (amplitude < 0) throw InvalidArgument("make_trajectory: amplitude must be >= 0");
  Trajectory t;
  t.preset = preset;
  t.poses.push_back(CameraPose{});
  const int m = n_views - 1;
  switch (preset) {
    case TrajectoryPreset::kLateral:
      for (double o : detail::symmetric_offsets(m, amplitude))
        t.poses.push_back(detail::translated({o, 0.0, 0.0}));
      break;
    case TrajectoryPreset::kUpDown:
      for (double o : detail::symmetric_offsets(m, amplitude))
        t.poses.push_back(detail::translated({0.0, o, 0.0}));
      break;
    case TrajectoryPreset::kZoomIn:
      for (int i = 1; i <= m; ++i)
        t.poses.push_back(detail::translated({0.0, 0.0, amplitude * i / m}));
      break;
    case TrajectoryPreset::kCircular: {
      const Eigen::Vector3d target(0.0, 0.0, z_focus);
      for (int i = 0; i < m; ++i) {
        const double a = 2.0 * M_PI * i / m;
        t.poses.push_back(detail::look_at({amplitude * std::cos(a), amplitude * std::sin(a), 0.0}, target));
      }
      break;
    }
  }
  return t;
}

}  // namespace scene4d
