// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scene4d/error.hpp"
#include "scene4d/flow.hpp"
#include "scene4d/gaussian.hpp"
#include "scene4d/losses.hpp"
#include "scene4d/motion3d.hpp"
#include "scene4d/rasterizer.hpp"
#include "scene4d/rng.hpp"
#include "scene4d/trajectory.hpp"
#include "scene4d/train.hpp"

namespace scene4d {

inline constexpr int kBasisSize = 4;
inline constexpr const char* kBasisId = "sin-cos-poly-4";
inline constexpr int kDeformChannels = 10;  // 3 position + 4 rotation + 3 log-scale

/// Fixed time basis over t in [0, 1]; every member vanishes at t = 0 so the
/// canonical state is untouched, and the first two are loop-periodic.
inline Eigen::Matrix<double, kBasisSize, 1> deform_basis(double t) {
  Eigen::Matrix<double, kBasisSize, 1> b;
  b[0] = std::sin(2.0 * M_PI * t);
  b[1] = 1.0 - std::cos(2.0 * M_PI * t);
  b[2] = t * t;
  b[3] = t * t * t * (1.0 - t);
  return b;
}

/// Temporal deformation: an explicit constant-velocity motion term per
/// Gaussian plus learned residual coefficients over the fixed time basis.
/// Residual columns: [0..2] position, [3..6] rotation (w,x,y,z), [7..9]
/// log-scale.
struct DeformationModel {
  std::vector<Eigen::Vector3d> motion_init;  // zero for non-animated Gaussians
  std::vector<Eigen::Matrix<double, kBasisSize, kDeformChannels>> coeffs;

  std::size_t size() const { return motion_init.size(); }

  static DeformationModel zeros(std::size_t n) {
    DeformationModel m;
    m.motion_init.assign(n, Eigen::Vector3d::Zero());
    m.coeffs.assign(n, Eigen::Matrix<double, kBasisSize, kDeformChannels>::Zero());
    return m;
  }

  /// Motion vectors transferred from a solved field via its point indices.
  static DeformationModel from_motion(std::size_t n, const MotionField3D& field) {
    DeformationModel m = zeros(n);
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (field.point_index[i] >= n) throw SizeMismatch("deformation model: motion index out of range");
      m.motion_init[field.point_index[i]] = field.displacement(i);
    }
    return m;
  }
};

/// Applies the deformation at time t in [0, 1]:
///   x' = x + t * motion + dx(t),  r' = normalize(r + dr(t)),  s' = s + ds(t).
/// At t = 0 the basis vanishes and the input cloud is returned bit-identical.
inline GaussianCloud deform(const GaussianCloud& cloud, const DeformationModel& model, double t) {
  if (model.size() != cloud.size()) throw SizeMismatch("deform: model sized to a different cloud");
  const auto b = deform_basis(t);
  GaussianCloud out = cloud;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Matrix<double, 1, kDeformChannels> delta = b.transpose() * model.coeffs[i];
    Gaussian& g = out.gaussians[i];
    g.mean += t * model.motion_init[i] + delta.segment<3>(0).transpose();
    const Eigen::Vector4d dq = delta.segment<4>(3).transpose();
    if (!dq.isZero(0.0)) {
      const Eigen::Quaterniond raw(g.rotation.w() + dq[0], g.rotation.x() + dq[1], g.rotation.y() + dq[2],
                                   g.rotation.z() + dq[3]);
      g.rotation = raw.normalized();
    }
    g.log_scale += delta.segment<3>(7).transpose();
  }
  return out;
}

struct StageSchedule {
  int stage1_steps = 300;
  int stage2_epochs = 2;
  std::vector<std::size_t> sampled_views;  // default 3 views chosen by the caller

  void validate(std::size_t n_views) const {
    if (sampled_views.empty()) throw InvalidArgument("stage schedule: sampled_views must be non-empty");
    for (const auto v : sampled_views)
      if (v >= n_views) throw InvalidArgument("stage schedule: sampled view out of range");
  }
};

/// Three views spread across the rig (first, middle, last of the remainder).
inline std::vector<std::size_t> default_sampled_views(std::size_t n_views, std::size_t count = 3) {
  std::vector<std::size_t> out;
  const std::size_t n = std::min(count, n_views);
  for (std::size_t k = 0; k < n; ++k) out.push_back(k * n_views / n);
  return out;
}

struct Stage2Config {
  double lambda = 0.2;
  uint64_t seed = 0;
  bool train_rotation_scale = true;  // freeze dr/ds when false
  // Adam rates per residual group
  double lr_position = 1.6e-3;  // x scene extent
  double lr_rotation = 1e-3;
  double lr_scale = 5e-3;
};

struct Stage2Result {
  DeformationModel model;
  std::vector<double> step_loss;
  double initial_loss = 0.0;  // mean over all (view, frame) pairs
  double final_loss = 0.0;
};

/// Mean photometric loss of the deformed renders over every (view, frame)
/// pair of the sampled videos.
inline double evaluate_stage2(const GaussianCloud& cloud, const DeformationModel& model,
                              const std::vector<FrameSequence>& videos, const std::vector<CameraModel>& cameras,
                              double lambda) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    BoolGrid valid(cameras[v].intrinsics.width, cameras[v].intrinsics.height, 1);
    for (std::size_t j = 0; j < videos[v].frames.size(); ++j) {
      const auto rendered = rasterize(deform(cloud, model, videos[v].times[j]), cameras[v]);
      total += photometric_loss(rendered.color, videos[v].frames[j], valid, lambda).loss;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

/// Stage-2 training: the static cloud and the motion term stay frozen; only
/// the residual coefficients learn, by Adam over seeded random (view, frame)
/// pairs, one epoch visiting every pair once.
inline Stage2Result train_stage2(const GaussianCloud& static_cloud, const DeformationModel& init,
                                 const std::vector<FrameSequence>& videos, const std::vector<CameraModel>& cameras,
                                 const StageSchedule& schedule, const Stage2Config& config = {}) {
  if (videos.size() != cameras.size() || videos.empty())
    throw InvalidArgument("train_stage2: videos and cameras must align and be non-empty");
  for (const auto& seq : videos) {
    if (seq.frames.empty()) throw EmptyVideo("train_stage2: empty frame sequence");
    seq.validate();
  }
  if (init.size() != static_cloud.size()) throw SizeMismatch("train_stage2: model sized to a different cloud");

  Stage2Result result;
  result.model = init;
  result.initial_loss = evaluate_stage2(static_cloud, result.model, videos, cameras, config.lambda);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (view, frame)
  for (std::size_t v = 0; v < videos.size(); ++v)
    for (std::size_t j = 0; j < videos[v].frames.size(); ++j) pairs.emplace_back(v, j);

  const std::size_t n = static_cloud.size();
  const double extent = std::max(scene_extent(static_cloud), 1e-9);
  std::vector<double> params(n * kBasisSize * kDeformChannels);
  std::vector<double> rate(params.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kBasisSize; ++k) {
      double* r = &rate[(i * kBasisSize + k) * kDeformChannels];
      for (int c = 0; c < 3; ++c) r[c] = config.lr_position * extent;
      for (int c = 3; c < 7; ++c) r[c] = config.train_rotation_scale ? config.lr_rotation : 0.0;
      for (int c = 7; c < 10; ++c) r[c] = config.train_rotation_scale ? config.lr_scale : 0.0;
    }
  }
  const auto pack = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < kBasisSize; ++k)
        for (int c = 0; c < kDeformChannels; ++c)
          params[(i * kBasisSize + k) * kDeformChannels + c] = result.model.coeffs[i](k, c);
  };
  const auto unpack = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < kBasisSize; ++k)
        for (int c = 0; c < kDeformChannels; ++c)
          result.model.coeffs[i](k, c) = params[(i * kBasisSize + k) * kDeformChannels + c];
  };
  pack();
  Adam adam(params.size());
  std::vector<double> grad(params.size());
  Rng rng(config.seed);

  for (int epoch = 0; epoch < schedule.stage2_epochs; ++epoch) {
    const auto order = rng.permutation(pairs.size());
    for (const auto pick : order) {
      const auto [v, j] = pairs[pick];
      const double t = videos[v].times[j];
      const GaussianCloud deformed = deform(static_cloud, result.model, t);
      BoolGrid valid(cameras[v].intrinsics.width, cameras[v].intrinsics.height, 1);
      const auto pr = photometric_loss(rasterize(deformed, cameras[v]).color, videos[v].frames[j], valid,
                                       config.lambda);
      if (!std::isfinite(pr.loss)) throw NonFiniteLoss("train_stage2: non-finite loss");
      result.step_loss.push_back(pr.loss);
      if (pr.loss < kConvergedLoss) continue;
      const auto grads = backward_rasterize(deformed, cameras[v], pr.gradient);

      const auto b = deform_basis(t);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        // position: x' = x + t*motion + dx
        Eigen::Matrix<double, 1, kDeformChannels> d_delta = Eigen::Matrix<double, 1, kDeformChannels>::Zero();
        d_delta.segment<3>(0) = grads[i].mean.transpose();
        // rotation through normalize(r + dr); the rasterizer gradient is
        // already tangent at the deformed quaternion
        const Eigen::Matrix<double, 1, kDeformChannels> delta = b.transpose() * result.model.coeffs[i];
        const Eigen::Vector4d dq = delta.segment<4>(3).transpose();
        Eigen::Vector4d raw(static_cloud[i].rotation.w() + dq[0], static_cloud[i].rotation.x() + dq[1],
                            static_cloud[i].rotation.y() + dq[2], static_cloud[i].rotation.z() + dq[3]);
        const double norm = raw.norm();
        const Eigen::Vector4d unit = raw / norm;
        const Eigen::Vector4d g_rot = grads[i].rotation;
        d_delta.segment<4>(3) = ((g_rot - unit * unit.dot(g_rot)) / norm).transpose();
        // log-scale: s' = s + ds
        d_delta.segment<3>(7) = grads[i].log_scale.transpose();

        for (int k = 0; k < kBasisSize; ++k)
          for (int c = 0; c < kDeformChannels; ++c)
            grad[(i * kBasisSize + k) * kDeformChannels + c] = b[k] * d_delta[c];
      }
      adam.step(params, grad, rate, 1.0);
      unpack();
    }
  }
  result.final_loss = evaluate_stage2(static_cloud, result.model, videos, cameras, config.lambda);
  return result;
}

enum class CameraSchedule { kFixed, kSweep };

/// Renders the deformed cloud at the given times. Times wrap by the loop
/// period, so frame t and t + loop share the same deformation phase. kFixed
/// holds the first trajectory pose; kSweep pairs pose j with frame j.
inline FrameSequence render_video(const GaussianCloud& static_cloud, const DeformationModel& model,
                                  const Trajectory& trajectory, const std::vector<double>& times,
                                  const CameraIntrinsics& intrinsics, CameraSchedule schedule = CameraSchedule::kFixed,
                                  double loop_period = 1.0) {
  if (trajectory.poses.empty()) throw InvalidArgument("render_video: empty trajectory");
  if (!(loop_period > 0)) throw InvalidArgument("render_video: loop_period must be > 0");
  FrameSequence seq;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double phase = std::fmod(times[j], loop_period) / loop_period;
    CameraModel cam;
    cam.intrinsics = intrinsics;
    cam.pose = (schedule == CameraSchedule::kFixed) ? trajectory.poses.front()
                                                    : trajectory.poses[j % trajectory.poses.size()];
    seq.frames.push_back(rasterize(deform(static_cloud, model, phase), cam).color);
    seq.times.push_back(times[j]);
  }
  return seq;
}

// -- serialization: JSON header + raw little-endian float64 payload ----------

inline void save_deformation(const DeformationModel& model, const std::string& path) {
  nlohmann::json header;
  header["K"] = kBasisSize;
  header["basis_id"] = kBasisId;
  header["N"] = model.size();
  const std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  const uint32_t len = static_cast<uint32_t>(hs.size());
  f.write("S4DF", 4);
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(hs.data(), hs.size());
  for (const auto& m : model.motion_init) f.write(reinterpret_cast<const char*>(m.data()), 3 * sizeof(double));
  for (const auto& c : model.coeffs) {
    // row-major: basis index outer, channel inner
    for (int k = 0; k < kBasisSize; ++k)
      for (int ch = 0; ch < kDeformChannels; ++ch) {
        const double v = c(k, ch);
        f.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  }
  if (!f) throw IoError("deformation write failed: " + path);
}

inline DeformationModel load_deformation(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "S4DF", 4) != 0) throw BadMagic("bad deformation file: " + path);
  uint32_t len = 0;
  if (!f.read(reinterpret_cast<char*>(&len), 4)) throw TruncatedFile("truncated deformation header: " + path);
  std::string hs(len, '\0');
  if (!f.read(hs.data(), len)) throw TruncatedFile("truncated deformation header: " + path);
  const auto header = nlohmann::json::parse(hs);
  if (header.at("K").get<int>() != kBasisSize || header.at("basis_id").get<std::string>() != kBasisId)
    throw IoError("deformation basis mismatch: " + path);
  const std::size_t n = header.at("N").get<std::size_t>();
  DeformationModel model = DeformationModel::zeros(n);
  for (auto& m : model.motion_init)
    if (!f.read(reinterpret_cast<char*>(m.data()), 3 * sizeof(double)))
      throw TruncatedFile("truncated deformation data: " + path);
  for (auto& c : model.coeffs)
    for (int k = 0; k < kBasisSize; ++k)
      for (int ch = 0; ch < kDeformChannels; ++ch) {
        double v = 0;
        if (!f.read(reinterpret_cast<char*>(&v), sizeof(double)))
          throw TruncatedFile("truncated deformation data: " + path);
        c(k, ch) = v;
      }
  return model;
}

}  // namespace scene4d
