// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "scene4d/camera.hpp"
#include "scene4d/error.hpp"
#include "scene4d/grid.hpp"
#include "scene4d/pointcloud.hpp"

namespace scene4d {

inline constexpr int kSplatRadius = 1;          // points splat into a (2r+1)^2 disc
inline constexpr double kDepthTie = 1e-9;       // z-buffer tie tolerance
inline constexpr double kInvalidDepth = 0.0;    // sentinel in depth rasters

struct RenderedView {
  Image color;
  Raster depth;        // camera-space z, kInvalidDepth where no point landed
  BoolGrid hole_mask;  // 1 = no point landed

  int width() const { return color.width(); }
  int height() const { return color.height(); }
};

/// Animated-region mask with values in [0, 1]; binarization is applied lazily.
struct MotionMask {
  Raster mask;

  bool animated(int x, int y, double threshold = 0.5) const { return mask.at(x, y) >= threshold; }
};

namespace detail {

/// Winner per pixel: nearest depth, then smallest splat-center distance, then
/// lowest point index. The distance rule makes a point splatting onto its own
/// projected pixel beat equal-depth neighbour splats, so re-rendering a cloud
/// with its source camera reproduces the source image exactly.
struct SplatKey {
  double depth = std::numeric_limits<double>::infinity();
  double dist2 = std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();

  bool beats(const SplatKey& o) const {
    if (depth < o.depth - kDepthTie) return true;
    if (depth > o.depth + kDepthTie) return false;
    if (dist2 != o.dist2) return dist2 < o.dist2;
    return index < o.index;
  }
};

/// Z-buffered splatting of per-point payloads. Emits the winning point index
/// per pixel (or npos for holes).
template <typename ProjectedRange>
inline Grid<std::size_t> splat_indices(const ProjectedRange& projected, int width, int height, Raster& depth_out) {
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  Grid<std::size_t> winner(width, height, npos);
  Grid<SplatKey> keys(width, height);
  for (const ProjectedPoint& p : projected) {
    const int px = static_cast<int>(std::lround(p.pixel.x()));
    const int py = static_cast<int>(std::lround(p.pixel.y()));
    for (int dy = -kSplatRadius; dy <= kSplatRadius; ++dy) {
      for (int dx = -kSplatRadius; dx <= kSplatRadius; ++dx) {
        const int x = px + dx, y = py + dy;
        if (!winner.contains(x, y)) continue;
        const double du = x - p.pixel.x(), dv = y - p.pixel.y();
        const SplatKey key{p.cam_depth, du * du + dv * dv, p.index};
        if (key.beats(keys.at(x, y))) {
          keys.at(x, y) = key;
          winner.at(x, y) = p.index;
        }
      }
    }
  }
  depth_out = Raster(width, height, kInvalidDepth);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (winner.at(x, y) != npos) depth_out.at(x, y) = keys.at(x, y).depth;
  return winner;
}

}  // namespace detail

/// Projects the cloud and splats it with a z-buffer. Colors are not yet
/// hole-filled; hole_mask marks pixels no point touched.
inline RenderedView render_view(const PointCloud& cloud, const CameraModel& camera) {
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  const auto projected = project_points(cloud, camera);
  RenderedView view{Image(w, h, Color::Zero()), Raster(w, h, kInvalidDepth), BoolGrid(w, h, 1)};
  const auto winner = detail::splat_indices(projected, w, h, view.depth);
  constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = winner.at(x, y);
      if (i == npos) continue;
      view.color.at(x, y) = cloud.colors[i];
      view.hole_mask.at(x, y) = 0;
    }
  }
  return view;
}

namespace detail {

/// Scanline linear interpolation along one axis. Returns false for gaps with
/// no anchor on both sides.
template <typename GetFn, typename SetFn, typename ValidFn>
inline void interpolate_line(int n, ValidFn valid, GetFn get, SetFn set) {
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    if (!valid(i)) continue;
    if (prev >= 0 && i - prev > 1) {
      const auto a = get(prev);
      const auto b = get(i);
      for (int k = prev + 1; k < i; ++k) {
        const double t = static_cast<double>(k - prev) / (i - prev);
        set(k, a * (1.0 - t) + b * t);
      }
    }
    prev = i;
  }
}

}  // namespace detail

/// Fills hole pixels by horizontal linear interpolation between the nearest
/// non-hole pixels of the row; remaining holes (rows without two anchors)
/// interpolate vertically, and any leftovers copy the nearest non-hole pixel.
/// hole_mask is preserved so callers can exclude filled pixels from losses.
inline RenderedView fill_holes(const RenderedView& view) {
  const int w = view.width(), h = view.height();
  bool any_hole = false, all_holes = true;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (view.hole_mask.at(x, y))
        any_hole = true;
      else
        all_holes = false;
    }
  }
  if (all_holes) throw AllHoles("fill_holes: every pixel is a hole");
  if (!any_hole) return view;

  RenderedView out = view;
  BoolGrid filled(w, h, 0);  // 1 = value defined (original or already filled)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) filled.at(x, y) = view.hole_mask.at(x, y) ? 0 : 1;

  // horizontal pass, anchored on original non-hole pixels only
  for (int y = 0; y < h; ++y) {
    detail::interpolate_line(
        w, [&](int x) { return !view.hole_mask.at(x, y); }, [&](int x) { return out.color.at(x, y); },
        [&](int x, const Color& c) {
          out.color.at(x, y) = c;
          filled.at(x, y) = 1;
        });
  }
  // vertical pass for border gaps and empty rows
  for (int x = 0; x < w; ++x) {
    detail::interpolate_line(
        h, [&](int y) { return !view.hole_mask.at(x, y); }, [&](int y) { return out.color.at(x, y); },
        [&](int y, const Color& c) {
          if (filled.at(x, y)) return;
          out.color.at(x, y) = c;
          filled.at(x, y) = 1;
        });
  }
  // leftovers: nearest original non-hole pixel (squared distance, row-major ties)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (filled.at(x, y)) continue;
      long best = std::numeric_limits<long>::max();
      Color best_color = Color::Zero();
      for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
          if (view.hole_mask.at(sx, sy)) continue;
          const long d = static_cast<long>(sx - x) * (sx - x) + static_cast<long>(sy - y) * (sy - y);
          if (d < best) {
            best = d;
            best_color = view.color.at(sx, sy);
          }
        }
      }
      out.color.at(x, y) = best_color;
    }
  }
  return out;
}

/// Reprojects the source-view mask into the target view: the mask values ride
/// along as point attributes through unproject + z-buffer splat, holes are
/// filled, and the result is clamped to [0, 1].
inline MotionMask render_motion_mask(const MotionMask& mask, const Raster& depth, const CameraModel& source_camera,
                                     const CameraModel& target_camera) {
  if (!mask.mask.same_size(depth)) throw DimensionMismatch("render_motion_mask: mask and depth dimensions disagree");
  // mask values encoded in the red channel of a synthetic image
  Image attr(depth.width(), depth.height(), Color::Zero());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) attr.at(x, y) = Color(mask.mask.at(x, y), 0.0, 0.0);
  const PointCloud cloud = unproject(attr, depth, source_camera);
  const RenderedView filled = fill_holes(render_view(cloud, target_camera));
  MotionMask out{Raster(filled.width(), filled.height(), 0.0)};
  for (int y = 0; y < filled.height(); ++y)
    for (int x = 0; x < filled.width(); ++x)
      out.mask.at(x, y) = std::clamp(filled.color.at(x, y).x(), 0.0, 1.0);
  return out;
}

}  // namespace scene4d
