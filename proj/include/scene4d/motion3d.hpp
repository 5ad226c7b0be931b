// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "scene4d/camera.hpp"
#include "scene4d/error.hpp"
#include "scene4d/flow.hpp"
#include "scene4d/pcrender.hpp"
#include "scene4d/pointcloud.hpp"
#include "scene4d/rng.hpp"

namespace scene4d {

/// Per-point 3D displacement of the animated region: fixed base positions and
/// learnable displaced positions. The motion vector of point i is
/// displaced[i] - base[i].
struct MotionField3D {
  std::vector<Eigen::Vector3d> base;
  std::vector<Eigen::Vector3d> displaced;
  std::vector<std::size_t> point_index;  // into the parent PointCloud

  std::size_t size() const { return base.size(); }
  Eigen::Vector3d displacement(std::size_t i) const { return displaced[i] - base[i]; }
};

/// Selects the cloud points whose source pixel falls in the binarized mask;
/// displaced positions start at the base (zero motion).
inline MotionField3D make_motion_field(const PointCloud& cloud, const MotionMask& mask, double threshold = 0.5) {
  MotionField3D f;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector2i px = cloud.source_pixels[i];
    if (!mask.mask.contains(px.x(), px.y()) || !mask.animated(px.x(), px.y(), threshold)) continue;
    f.base.push_back(cloud.positions[i]);
    f.displaced.push_back(cloud.positions[i]);
    f.point_index.push_back(i);
  }
  if (f.base.empty()) throw EmptyMask("make_motion_field: mask selects no point");
  return f;
}

struct MotionSolveConfig {
  int iterations = 200;
  int batch_views = 30;
  double lr0 = 0.5;
  double decay = 0.99;  // exponential learning-rate factor per iteration
  uint64_t seed = 0;

  void validate() const {
    if (iterations < 1) throw InvalidArgument("motion solve: iterations must be >= 1");
    if (batch_views < 1) throw InvalidArgument("motion solve: batch_views must be >= 1");
    if (!(lr0 > 0)) throw InvalidArgument("motion solve: lr0 must be > 0");
    if (!(decay > 0 && decay <= 1)) throw InvalidArgument("motion solve: decay must be in (0, 1]");
  }
};

struct ProjectedMotion {
  std::vector<std::size_t> field_index;
  std::vector<Eigen::Vector2d> start;         // projected base position
  std::vector<Eigen::Vector2d> displacement;  // projected displaced minus start
  std::vector<std::size_t> dropped;           // points failing the near-plane premise
};

/// Projects the motion field into one view: start = projected base, 2D
/// displacement = projected displaced - start. Points clipped in either state
/// are dropped and reported.
inline ProjectedMotion project_motion(const MotionField3D& field, const CameraModel& camera) {
  ProjectedMotion out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto s = project_point(field.base[i], camera);
    const auto e = project_point(field.displaced[i], camera);
    if (!s || !e) {
      out.dropped.push_back(i);
      continue;
    }
    out.field_index.push_back(i);
    out.start.push_back(*s);
    out.displacement.push_back(*e - *s);
  }
  return out;
}

/// Dense per-view flow raster of the projected motion, z-buffer splatted at
/// the base projections; valid only where an animated point landed.
inline FlowField2D project_motion_field(const MotionField3D& field, const CameraModel& camera) {
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  std::vector<ProjectedPoint> projected;
  std::vector<Eigen::Vector2d> displacement(field.size(), Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < field.size(); ++i) {
    double z = 0;
    const auto s = project_point(field.base[i], camera, &z);
    const auto e = project_point(field.displaced[i], camera);
    if (!s || !e) continue;
    projected.push_back({*s, z, i});
    displacement[i] = *e - *s;
  }
  Raster depth;
  const auto winner = detail::splat_indices(projected, w, h, depth);
  FlowField2D flow(w, h);
  flow.valid.fill(0);
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = winner.at(x, y);
      if (i == npos) continue;
      flow.u.at(x, y) = displacement[i].x();
      flow.v.at(x, y) = displacement[i].y();
      flow.valid.at(x, y) = 1;
    }
  }
  return flow;
}

namespace detail {

struct ViewSample {
  bool contributes = false;
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d target = Eigen::Vector2d::Zero();  // flow sampled at start
};

/// Start projections and flow targets are fixed during optimization (the base
/// is frozen and flows are sampled at the base projection).
inline std::vector<ViewSample> make_view_samples(const MotionField3D& field, const FlowField2D& flow,
                                                 const CameraModel& camera) {
  std::vector<ViewSample> samples(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto s = project_point(field.base[i], camera);
    if (!s) continue;
    Eigen::Vector2d target;
    if (!flow.sample(s->x(), s->y(), target)) continue;
    samples[i] = {true, *s, target};
  }
  return samples;
}

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace detail

struct MotionLoss {
  double loss = 0.0;
  std::vector<Eigen::Vector3d> gradient;  // wrt displaced positions
  std::size_t contributing_pairs = 0;
};

namespace detail {

inline MotionLoss motion_loss_core(const MotionField3D& field, const std::vector<CameraModel>& cameras,
                                   const std::vector<std::vector<ViewSample>>& samples,
                                   const std::vector<std::size_t>& views) {
  MotionLoss out;
  out.gradient.assign(field.size(), Eigen::Vector3d::Zero());
  for (const std::size_t v : views) {
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (!samples[v][i].contributes) continue;
      const auto e = project_point(field.displaced[i], cameras[v]);
      if (!e) continue;
      const Eigen::Vector2d residual = samples[v][i].target - (*e - samples[v][i].start);
      out.loss += std::abs(residual.x()) + std::abs(residual.y());
      const Eigen::Vector2d dloss_dend(-sign(residual.x()), -sign(residual.y()));
      out.gradient[i] += projection_jacobian(field.displaced[i], cameras[v]).transpose() * dloss_dend;
      ++out.contributing_pairs;
    }
  }
  if (out.contributing_pairs == 0) throw NoCoverage("motion_loss: no (view, point) pair contributes");
  out.loss /= static_cast<double>(out.contributing_pairs);
  for (auto& g : out.gradient) g /= static_cast<double>(out.contributing_pairs);
  return out;
}

}  // namespace detail

/// L1 objective between each view's flow (sampled at the projected base) and
/// the projected motion, averaged over contributing (view, point) pairs; the
/// gradient flows through the projection of the displaced point.
inline MotionLoss motion_loss(const MotionField3D& field, const std::vector<FlowField2D>& flows,
                              const std::vector<CameraModel>& cameras) {
  if (flows.size() != cameras.size() || flows.empty())
    throw InvalidArgument("motion_loss: flows and cameras must align and be non-empty");
  std::vector<std::vector<detail::ViewSample>> samples(flows.size());
  std::vector<std::size_t> views(flows.size());
  for (std::size_t v = 0; v < flows.size(); ++v) {
    samples[v] = detail::make_view_samples(field, flows[v], cameras[v]);
    views[v] = v;
  }
  return detail::motion_loss_core(field, cameras, samples, views);
}

struct SolveRecord {
  int iteration;
  double lr;
  double loss;
};

struct MotionSolveResult {
  MotionField3D field;
  std::vector<SolveRecord> history;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Fits the displaced positions by SGD over seeded random view batches with
/// an exponentially decayed step size.
inline MotionSolveResult optimize_motion(const PointCloud& cloud, const MotionMask& mask,
                                         const std::vector<FlowField2D>& flows,
                                         const std::vector<CameraModel>& cameras, const MotionSolveConfig& config) {
  config.validate();
  if (flows.size() != cameras.size() || flows.empty())
    throw InvalidArgument("optimize_motion: flows and cameras must align and be non-empty");
  MotionSolveResult result;
  result.field = make_motion_field(cloud, mask);

  const std::size_t n_views = flows.size();
  std::vector<std::vector<detail::ViewSample>> samples(n_views);
  std::vector<std::size_t> all_views(n_views);
  for (std::size_t v = 0; v < n_views; ++v) {
    samples[v] = detail::make_view_samples(result.field, flows[v], cameras[v]);
    all_views[v] = v;
  }
  result.initial_loss = detail::motion_loss_core(result.field, cameras, samples, all_views).loss;

  Rng rng(config.seed);
  std::vector<std::size_t> batch(config.batch_views);
  for (int k = 0; k < config.iterations; ++k) {
    if (static_cast<std::size_t>(config.batch_views) <= n_views) {
      const auto perm = rng.permutation(n_views);
      std::copy_n(perm.begin(), config.batch_views, batch.begin());
    } else {
      for (auto& b : batch) b = rng.uniform_index(n_views);
    }
    const MotionLoss step = detail::motion_loss_core(result.field, cameras, samples, batch);
    if (!std::isfinite(step.loss))
      throw NonFiniteLoss("optimize_motion: non-finite loss at iteration " + std::to_string(k));
    const double lr = config.lr0 * std::pow(config.decay, k);
    for (std::size_t i = 0; i < result.field.size(); ++i) result.field.displaced[i] -= lr * step.gradient[i];
    result.history.push_back({k, lr, step.loss});
  }
  result.final_loss = detail::motion_loss_core(result.field, cameras, samples, all_views).loss;
  return result;
}

namespace detail {

/// Per-view depth rasters of the splatted reference geometry, for occlusion
/// tests (1% of depth tolerance).
inline std::vector<Raster> occlusion_buffers(const std::vector<Eigen::Vector3d>& positions,
                                             const std::vector<CameraModel>& cameras, std::size_t reference_view) {
  std::vector<Raster> view_depth(cameras.size());
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    if (v == reference_view) continue;
    std::vector<ProjectedPoint> projected;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      double z = 0;
      if (auto px = project_point(positions[i], cameras[v], &z)) projected.push_back({*px, z, i});
    }
    splat_indices(projected, cameras[v].intrinsics.width, cameras[v].intrinsics.height, view_depth[v]);
  }
  return view_depth;
}

inline bool occluded(const Raster& zbuffer, const Eigen::Vector2d& pixel, double z, double tolerance) {
  const int qx = static_cast<int>(std::lround(pixel.x()));
  const int qy = static_cast<int>(std::lround(pixel.y()));
  if (!zbuffer.contains(qx, qy)) return true;
  const double zbuf = zbuffer.at(qx, qy);
  return !depth_valid(zbuf) || z > zbuf * (1.0 + tolerance);
}

}  // namespace detail

/// Multi-view consistency of per-view flows, measured in the reference view:
/// each reference pixel with valid depth is lifted to 3D, reprojected into
/// every other view (with a 1%-of-depth z-buffer occlusion test against the
/// splatted geometry), the other view's flow is sampled there, and the EPE is
/// the mean L2 distance to the reference flow over all (view, point) pairs.
inline double consistency_epe(const std::vector<FlowField2D>& flows, const std::vector<CameraModel>& cameras,
                              std::size_t reference_view, const Raster& reference_depth,
                              const MotionMask* mask = nullptr, double occlusion_tolerance = 0.01) {
  if (flows.size() != cameras.size() || flows.size() < 2)
    throw InvalidArgument("consistency_epe: need at least two aligned views");
  if (reference_view >= flows.size()) throw InvalidArgument("consistency_epe: bad reference index");

  // lift the full reference geometry once, for occlusion testing
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector2i> pixels;
  for (int y = 0; y < reference_depth.height(); ++y) {
    for (int x = 0; x < reference_depth.width(); ++x) {
      const double d = reference_depth.at(x, y);
      if (!depth_valid(d)) continue;
      positions.push_back(unproject_pixel(x, y, d, cameras[reference_view]));
      pixels.emplace_back(x, y);
    }
  }
  if (positions.empty()) throw NoCorrespondence("consistency_epe: reference depth has no valid pixel");

  const std::vector<Raster> view_depth = detail::occlusion_buffers(positions, cameras, reference_view);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Eigen::Vector2i px = pixels[i];
    if (mask && !mask->animated(px.x(), px.y())) continue;
    if (!flows[reference_view].valid.at(px.x(), px.y())) continue;
    const Eigen::Vector2d ref_flow(flows[reference_view].u.at(px.x(), px.y()),
                                   flows[reference_view].v.at(px.x(), px.y()));
    for (std::size_t v = 0; v < flows.size(); ++v) {
      if (v == reference_view) continue;
      double z = 0;
      const auto q = project_point(positions[i], cameras[v], &z);
      if (!q) continue;
      if (detail::occluded(view_depth[v], *q, z, occlusion_tolerance)) continue;
      Eigen::Vector2d other;
      if (!flows[v].sample(q->x(), q->y(), other)) continue;
      total += (other - ref_flow).norm();
      ++count;
    }
  }
  if (count == 0) throw NoCorrespondence("consistency_epe: no surviving correspondence");
  return total / static_cast<double>(count);
}

/// Field variant: the per-view flows are the exact projections of the motion
/// field, so the measure isolates the consistency of the 3D motion itself.
inline double consistency_epe(const MotionField3D& field, const std::vector<CameraModel>& cameras,
                              std::size_t reference_view, const Raster& reference_depth,
                              double occlusion_tolerance = 0.01) {
  if (cameras.size() < 2) throw InvalidArgument("consistency_epe: need at least two views");
  if (reference_view >= cameras.size()) throw InvalidArgument("consistency_epe: bad reference index");

  std::vector<Eigen::Vector3d> positions;
  for (int y = 0; y < reference_depth.height(); ++y)
    for (int x = 0; x < reference_depth.width(); ++x)
      if (depth_valid(reference_depth.at(x, y)))
        positions.push_back(unproject_pixel(x, y, reference_depth.at(x, y), cameras[reference_view]));
  const std::vector<Raster> view_depth = detail::occlusion_buffers(positions, cameras, reference_view);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto ref_start = project_point(field.base[i], cameras[reference_view]);
    const auto ref_end = project_point(field.displaced[i], cameras[reference_view]);
    if (!ref_start || !ref_end) continue;
    const Eigen::Vector2d ref_flow = *ref_end - *ref_start;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
      if (v == reference_view) continue;
      double z = 0;
      const auto start = project_point(field.base[i], cameras[v], &z);
      const auto end = project_point(field.displaced[i], cameras[v]);
      if (!start || !end) continue;
      if (detail::occluded(view_depth[v], *start, z, occlusion_tolerance)) continue;
      total += ((*end - *start) - ref_flow).norm();
      ++count;
    }
  }
  if (count == 0) throw NoCorrespondence("consistency_epe: no surviving correspondence");
  return total / static_cast<double>(count);
}

}  // namespace scene4d
