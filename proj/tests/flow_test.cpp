// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "scene4d/flow.hpp"
#include "scene4d/rng.hpp"

using namespace scene4d;
namespace fs = std::filesystem;

namespace {

MotionMask full_mask(int w, int h) { return MotionMask{Raster(w, h, 1.0)}; }

Image stripes(int w, int h, int period = 8) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = (x % period) < period / 2 ? 0.9 : 0.1;
      img.at(x, y) = Color(v, v, v);
    }
  return img;
}

fs::path temp_file(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("scene4d_flow_" + name);
  fs::remove(p);
  return p;
}

}  // namespace

TEST_CASE("advect at t=0 and under uniform flow") {
  FlowField2D flow = synth_flow(FlowKind::kUniform, {.u0 = 2.0, .v0 = -1.0}, full_mask(32, 32));
  const std::vector<Eigen::Vector2d> pts{{10, 10}, {3.5, 20.25}};
  const auto still = advect(pts, flow, 0.0);
  CHECK(still[0].position == pts[0]);
  CHECK(still[1].position == pts[1]);

  const auto moved = advect(pts, flow, 3.0);
  CHECK(moved[0].position.isApprox(Eigen::Vector2d(16, 7), 1e-12));
  CHECK(moved[0].inside);
}

TEST_CASE("advection composes over time for uniform fields") {
  FlowField2D flow = synth_flow(FlowKind::kUniform, {.u0 = 0.7, .v0 = 0.3}, full_mask(64, 64));
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d p(rng.uniform(5, 40), rng.uniform(5, 40));
    const double t1 = rng.uniform(0, 3), t2 = rng.uniform(0, 3);
    const auto one = advect({p}, flow, t1);
    const auto two = advect({one[0].position}, flow, t2);
    const auto direct = advect({p}, flow, t1 + t2);
    CHECK((two[0].position - direct[0].position).norm() < 1e-9);
  }
}

TEST_CASE("advection is linear in t for any flow") {
  Rng rng(6);
  FlowField2D flow(24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      flow.u.at(x, y) = rng.uniform(-2, 2);
      flow.v.at(x, y) = rng.uniform(-2, 2);
    }
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d p(rng.uniform(2, 20), rng.uniform(2, 20));
    const double t = rng.uniform(0.1, 4.0), alpha = rng.uniform(0.1, 2.0);
    const Eigen::Vector2d d_full = advect({p}, flow, t)[0].position - p;
    const Eigen::Vector2d d_scaled = advect({p}, flow, alpha * t)[0].position - p;
    CHECK((d_scaled - alpha * d_full).norm() < 1e-12);
  }
}

TEST_CASE("synth_flow kinds and mask gating") {
  const int w = 33, h = 33;
  MotionMask mask{Raster(w, h, 0.0)};
  for (int y = 8; y < 25; ++y)
    for (int x = 8; x < 25; ++x) mask.mask.at(x, y) = 1.0;

  const FlowField2D uni = synth_flow(FlowKind::kUniform, {.u0 = 1.0, .v0 = 0.0}, mask);
  CHECK(uni.u.at(16, 16) == 1.0);
  CHECK(uni.v.at(16, 16) == 0.0);

  const double cx = 16, cy = 16;
  const FlowField2D vor = synth_flow(FlowKind::kVortex, {.omega = 1.0, .cx = cx, .cy = cy}, mask);
  const double r = 5;
  CHECK(vor.u.at(21, 16) == 0.0);
  CHECK(vor.v.at(21, 16) == Catch::Approx(r));

  const FlowField2D shear = synth_flow(FlowKind::kShear, {.shear = 0.5, .cx = cx, .cy = cy}, mask);
  CHECK(shear.u.at(12, 20) == Catch::Approx(0.5 * (20 - cy)));
  CHECK(shear.v.at(12, 20) == 0.0);

  // flow exactly zero outside the binarized mask, all kinds
  for (const auto* f : {&uni, &vor, &shear}) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (mask.animated(x, y)) continue;
        REQUIRE(f->u.at(x, y) == 0.0);
        REQUIRE(f->v.at(x, y) == 0.0);
      }
  }

  CHECK_THROWS_AS(flow_kind_from_string("curl"), UnknownKind);
}

TEST_CASE("vortex field is divergence-free") {
  const int w = 32, h = 32;
  const FlowField2D vor = synth_flow(FlowKind::kVortex, {.omega = 0.8, .cx = 15.5, .cy = 15.5}, full_mask(w, h));
  // discrete divergence by central differences on interior pixels
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double div = (vor.u.at(x + 1, y) - vor.u.at(x - 1, y)) / 2.0 +
                         (vor.v.at(x, y + 1) - vor.v.at(x, y - 1)) / 2.0;
      REQUIRE(std::abs(div) < 1e-6);
    }
  }
}

TEST_CASE("synthesize_frame is the base image for zero flow") {
  const Image base = stripes(32, 24);
  const FlowField2D zero(32, 24);
  const Image out = synthesize_frame(base, zero, 0.37, 1.0);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x) REQUIRE(out.at(x, y) == base.at(x, y));
}

TEST_CASE("synthesize_frame loop closure") {
  const int w = 48, h = 32;
  const Image base = stripes(w, h);
  MotionMask mask{Raster(w, h, 0.0)};
  for (int y = 4; y < 28; ++y)
    for (int x = 4; x < 44; ++x) mask.mask.at(x, y) = 1.0;
  const FlowField2D flow = synth_flow(FlowKind::kUniform, {.u0 = 3.0, .v0 = 1.0}, mask);
  const double loop = 1.25;
  const Image at0 = synthesize_frame(base, flow, 0.0, loop);
  const Image atL = synthesize_frame(base, flow, loop, loop);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) REQUIRE((at0.at(x, y) - atL.at(x, y)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("synthesize_frame crossfade matches the analytic two-phase blend") {
  const int w = 60, h = 20;
  const Image base = stripes(w, h, 10);
  const FlowField2D flow = synth_flow(FlowKind::kUniform, {.u0 = 5.0, .v0 = 0.0}, full_mask(w, h));
  const double loop = 1.0, t = 0.2 * loop;
  const Image out = synthesize_frame(base, flow, t, loop);

  // phase s = 0.2: +1 px shift with weight 0.8, -4 px shift with weight 0.2
  const double s = 0.2;
  const double w_fwd = 1.0 - s, w_bwd = s;
  for (int y = 0; y < h; ++y) {
    for (int x = 8; x < w - 8; ++x) {
      const Color expected =
          (w_fwd * base.at(x - 1, y) + w_bwd * base.at(x + 4, y)) / (w_fwd + w_bwd);
      REQUIRE((out.at(x, y) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  // cross-correlation over integer shifts peaks at the dominant +1 px warp
  const auto correlate = [&](int shift) {
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 8; x < w - 8; ++x) acc += out.at(x, y).dot(base.at(x - shift, y));
    return acc;
  };
  const double peak = correlate(1);
  for (int shift = -6; shift <= 6; ++shift) {
    if (shift == 1) continue;
    CHECK(correlate(shift) < peak);
  }
}

TEST_CASE("flo round trip and file layout") {
  FlowField2D tiny(1, 1);
  const auto p1 = temp_file("tiny.flo");
  write_flo(tiny, p1.string());
  std::ifstream f(p1, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::vector<unsigned char> expected = {0x50, 0x49, 0x45, 0x48, 1, 0, 0, 0, 1, 0,
                                               0,    0,    0,    0,    0, 0, 0, 0, 0, 0};
  CHECK(bytes == expected);

  Rng rng(17);
  FlowField2D field(7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      field.u.at(x, y) = static_cast<float>(rng.normal(0, 3));
      field.v.at(x, y) = static_cast<float>(rng.normal(0, 3));
    }
  const auto p2 = temp_file("rt.flo");
  write_flo(field, p2.string());
  const FlowField2D back = read_flo(p2.string());
  CHECK(back.u == field.u);
  CHECK(back.v == field.v);

  // write(read(file)) is byte-identical
  const auto p3 = temp_file("rt2.flo");
  write_flo(back, p3.string());
  std::ifstream fa(p2, std::ios::binary), fb(p3, std::ios::binary);
  const std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
}

TEST_CASE("flo error handling") {
  const auto bad = temp_file("bad.flo");
  {
    std::ofstream f(bad, std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(read_flo(bad.string()), BadMagic);

  const auto trunc = temp_file("trunc.flo");
  {
    std::ofstream f(trunc, std::ios::binary);
    f.write("PIEH", 4);
    const uint32_t dims[2] = {4, 4};
    f.write(reinterpret_cast<const char*>(dims), 8);
    const float some = 1.0f;
    f.write(reinterpret_cast<const char*>(&some), 4);
  }
  CHECK_THROWS_AS(read_flo(trunc.string()), TruncatedFile);
  CHECK_THROWS_AS(read_flo("/nonexistent/path.flo"), IoError);
}

TEST_CASE("frame sequence validation") {
  FrameSequence seq;
  seq.frames = {Image(2, 2), Image(2, 2)};
  seq.times = {0.0, 0.5};
  CHECK_NOTHROW(seq.validate());
  seq.times = {0.5, 0.5};
  CHECK_THROWS_AS(seq.validate(), InvalidArgument);
  seq.times = {0.0};
  CHECK_THROWS_AS(seq.validate(), SizeMismatch);
}
