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

#include "scene4d/error.hpp"
#include "scene4d/grid.hpp"
#include "scene4d/pcrender.hpp"

namespace scene4d {

/// Dense per-pixel displacement in pixels per unit time. The field is frozen
/// in time: a particle keeps the velocity sampled at its start position.
struct FlowField2D {
  Raster u, v;
  BoolGrid valid;  // u, v are zero on invalid pixels

  FlowField2D() = default;
  FlowField2D(int width, int height)
      : u(width, height, 0.0), v(width, height, 0.0), valid(width, height, 1) {}

  int width() const { return u.width(); }
  int height() const { return u.height(); }

  bool sample(double x, double y, Eigen::Vector2d& out) const {
    const auto ok = [this](int cx, int cy) { return valid.at(cx, cy) != 0; };
    double su = 0, sv = 0;
    if (!bilinear_sample(u, x, y, su, ok) || !bilinear_sample(v, x, y, sv, ok)) return false;
    out = {su, sv};
    return true;
  }
};

struct FrameSequence {
  std::vector<Image> frames;
  std::vector<double> times;  // strictly increasing, in [0, 1] for one loop

  void validate() const {
    if (frames.size() != times.size()) throw SizeMismatch("frame sequence: |frames| != |times|");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw InvalidArgument("frame sequence: times not strictly increasing");
  }
};

struct AdvectedPoint {
  Eigen::Vector2d position;
  bool inside;  // false when the result leaves the image bounds
};

/// p(t) = p(0) + t * F(p(0)), velocity sampled once at the start position.
inline std::vector<AdvectedPoint> advect(const std::vector<Eigen::Vector2d>& positions, const FlowField2D& flow,
                                         double t) {
  std::vector<AdvectedPoint> out;
  out.reserve(positions.size());
  for (const auto& p : positions) {
    Eigen::Vector2d vel = Eigen::Vector2d::Zero();
    flow.sample(p.x(), p.y(), vel);
    const Eigen::Vector2d q = p + t * vel;
    const bool inside =
        q.x() >= 0 && q.x() <= flow.width() - 1 && q.y() >= 0 && q.y() <= flow.height() - 1;
    out.push_back({q, inside});
  }
  return out;
}

enum class FlowKind { kUniform, kVortex, kShear };

inline FlowKind flow_kind_from_string(const std::string& s) {
  if (s == "uniform") return FlowKind::kUniform;
  if (s == "vortex") return FlowKind::kVortex;
  if (s == "shear") return FlowKind::kShear;
  throw UnknownKind("unknown flow kind: " + s);
}

struct FlowParams {
  double u0 = 0, v0 = 0;        // uniform
  double omega = 0;             // vortex angular rate
  double shear = 0;             // du/dy
  double cx = 0, cy = 0;        // vortex / shear center
};

/// Test-fixture flow generator standing in for an external 2D motion
/// estimator. The flow is exactly zero outside the binarized mask.
inline FlowField2D synth_flow(FlowKind kind, const FlowParams& p, const MotionMask& mask) {
  FlowField2D f(mask.mask.width(), mask.mask.height());
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (!mask.animated(x, y)) continue;
      switch (kind) {
        case FlowKind::kUniform:
          f.u.at(x, y) = p.u0;
          f.v.at(x, y) = p.v0;
          break;
        case FlowKind::kVortex:
          f.u.at(x, y) = -p.omega * (y - p.cy);
          f.v.at(x, y) = p.omega * (x - p.cx);
          break;
        case FlowKind::kShear:
          f.u.at(x, y) = p.shear * (y - p.cy);
          f.v.at(x, y) = 0.0;
          break;
      }
    }
  }
  return f;
}

namespace detail {

inline constexpr double kSplatWeightFloor = 1e-6;

/// Forward bilinear splat of `src` pixels displaced by per-pixel offsets,
/// accumulated with the given scalar weight.
inline void forward_splat(const Image& src, const FlowField2D& flow, double displacement_scale, double weight,
                          Grid<Eigen::Vector3d>& color_acc, Raster& weight_acc) {
  if (weight == 0.0) return;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const double fu = flow.u.at(x, y), fv = flow.v.at(x, y);
      const double qx = x + displacement_scale * fu;
      const double qy = y + displacement_scale * fv;
      const int x0 = static_cast<int>(std::floor(qx));
      const int y0 = static_cast<int>(std::floor(qy));
      const double ax = qx - x0, ay = qy - y0;
      const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      const int px[4] = {x0, x0 + 1, x0, x0 + 1};
      const int py[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0 || !color_acc.contains(px[k], py[k])) continue;
        color_acc.at(px[k], py[k]) += (weight * w[k]) * src.at(x, y);
        weight_acc.at(px[k], py[k]) += weight * w[k];
      }
    }
  }
}

}  // namespace detail

/// Looping frame synthesis by symmetric crossfade: at phase s = (t mod L)/L
/// the base image is forward-warped by s*L*F with weight (1-s) and by
/// (s-1)*L*F with weight s, the two splats are jointly normalized, holes are
/// interpolated, and zero-flow pixels are copied from the base unchanged.
inline Image synthesize_frame(const Image& base, const FlowField2D& flow, double t, double loop_period) {
  if (!(loop_period > 0)) throw InvalidArgument("synthesize_frame: loop_period must be > 0");
  if (t < 0) throw InvalidArgument("synthesize_frame: t must be >= 0");
  if (!flow.u.same_size(base)) throw DimensionMismatch("synthesize_frame: base and flow dimensions disagree");
  const double s = std::fmod(t, loop_period) / loop_period;

  const int w = base.width(), h = base.height();
  Grid<Eigen::Vector3d> color_acc(w, h, Eigen::Vector3d::Zero());
  Raster weight_acc(w, h, 0.0);
  detail::forward_splat(base, flow, s * loop_period, 1.0 - s, color_acc, weight_acc);
  detail::forward_splat(base, flow, (s - 1.0) * loop_period, s, color_acc, weight_acc);

  RenderedView view{Image(w, h, Color::Zero()), Raster(w, h, kInvalidDepth), BoolGrid(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (weight_acc.at(x, y) >= detail::kSplatWeightFloor) {
        view.color.at(x, y) = color_acc.at(x, y) / weight_acc.at(x, y);
        view.depth.at(x, y) = 1.0;
        view.hole_mask.at(x, y) = 0;
      }
    }
  }
  Image out = fill_holes(view).color;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (flow.u.at(x, y) == 0.0 && flow.v.at(x, y) == 0.0) out.at(x, y) = base.at(x, y);
  return out;
}

// Middlebury .flo format: "PIEH", int32 width, int32 height, then row-major
// interleaved (u, v) float32, all little-endian.

namespace detail {

inline void put_le32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_le32(std::istream& is, uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
      (static_cast<uint32_t>(b[3]) << 24);
  return true;
}

inline uint32_t float_bits(float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  return v;
}

inline float bits_float(uint32_t v) {
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace detail

inline void write_flo(const FlowField2D& flow, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write("PIEH", 4);
  detail::put_le32(f, static_cast<uint32_t>(flow.width()));
  detail::put_le32(f, static_cast<uint32_t>(flow.height()));
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      detail::put_le32(f, detail::float_bits(static_cast<float>(flow.u.at(x, y))));
      detail::put_le32(f, detail::float_bits(static_cast<float>(flow.v.at(x, y))));
    }
  }
  if (!f) throw IoError("flo write failed: " + path);
}

inline FlowField2D read_flo(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  char magic[4];
  if (!f.read(magic, 4)) throw TruncatedFile("truncated flo header: " + path);
  if (std::memcmp(magic, "PIEH", 4) != 0) throw BadMagic("bad flo magic: " + path);
  uint32_t w = 0, h = 0;
  if (!detail::get_le32(f, w) || !detail::get_le32(f, h)) throw TruncatedFile("truncated flo header: " + path);
  FlowField2D flow(static_cast<int>(w), static_cast<int>(h));
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      uint32_t bu = 0, bv = 0;
      if (!detail::get_le32(f, bu) || !detail::get_le32(f, bv))
        throw TruncatedFile("truncated flo data: " + path);
      flow.u.at(x, y) = detail::bits_float(bu);
      flow.v.at(x, y) = detail::bits_float(bv);
    }
  }
  return flow;
}

}  // namespace scene4d
