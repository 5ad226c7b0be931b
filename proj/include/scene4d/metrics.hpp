// Copyright Contributors to the scene4d Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scene4d/error.hpp"
#include "scene4d/flow.hpp"
#include "scene4d/grid.hpp"
#include "scene4d/ssim.hpp"

namespace scene4d {

inline constexpr double kPsnrCsvCap = 99.0;  // "inf" rows are capped in CSV output

/// 10 log10(1 / MSE) over (masked) pixels of [0, 1] images; +infinity for
/// identical inputs.
inline double psnr(const Image& a, const Image& b, const BoolGrid* mask = nullptr) {
  if (!a.same_size(b)) throw DimensionMismatch("psnr: image dimensions disagree");
  if (mask && !a.same_size(*mask)) throw DimensionMismatch("psnr: mask dimensions disagree");
  double mse = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask && !mask->at(x, y)) continue;
      mse += (a.at(x, y) - b.at(x, y)).squaredNorm();
      count += 3;
    }
  }
  if (count == 0) throw EmptyMask("psnr: empty mask");
  mse /= static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

// ssim(a, b, mask, gradient) comes from ssim.hpp; the masked variant averages
// windows that lie fully inside the mask.

/// Mean end-point error: L2 distance between flows over pixels valid in both
/// (and in the mask when given).
inline double epe(const FlowField2D& f, const FlowField2D& g, const BoolGrid* mask = nullptr) {
  if (!f.u.same_size(g.u)) throw DimensionMismatch("epe: flow dimensions disagree");
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (mask && !mask->at(x, y)) continue;
      if (!f.valid.at(x, y) || !g.valid.at(x, y)) continue;
      const double du = f.u.at(x, y) - g.u.at(x, y);
      const double dv = f.v.at(x, y) - g.v.at(x, y);
      total += std::sqrt(du * du + dv * dv);
      ++count;
    }
  }
  if (count == 0) throw EmptyOverlap("epe: no valid overlapping pixel");
  return total / static_cast<double>(count);
}

struct FrameScores {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double m_psnr = std::numeric_limits<double>::quiet_NaN();  // NaN = no mask
  double m_ssim = std::numeric_limits<double>::quiet_NaN();
};

struct EvalReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double m_psnr = std::numeric_limits<double>::quiet_NaN();
  double m_ssim = std::numeric_limits<double>::quiet_NaN();
  double epe = std::numeric_limits<double>::quiet_NaN();  // NaN = no flows given
  std::vector<FrameScores> frames;
};

/// Per-frame scores plus aggregates (mean over frames; infinities survive).
inline EvalReport evaluate_frames(const std::vector<Image>& predicted, const std::vector<Image>& truth,
                                  const BoolGrid* mask = nullptr) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw ManifestMismatch("evaluate_frames: sequences must align and be non-empty");
  EvalReport report;
  double sum_psnr = 0, sum_ssim = 0, sum_mp = 0, sum_ms = 0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    FrameScores fs;
    fs.frame = static_cast<int>(j);
    fs.psnr = psnr(predicted[j], truth[j]);
    fs.ssim = ssim(predicted[j], truth[j]);
    sum_psnr += fs.psnr;
    sum_ssim += fs.ssim;
    if (mask) {
      fs.m_psnr = psnr(predicted[j], truth[j], mask);
      fs.m_ssim = ssim(predicted[j], truth[j], mask);
      sum_mp += fs.m_psnr;
      sum_ms += fs.m_ssim;
    }
    report.frames.push_back(fs);
  }
  const double n = static_cast<double>(predicted.size());
  report.psnr = sum_psnr / n;
  report.ssim = sum_ssim / n;
  if (mask) {
    report.m_psnr = sum_mp / n;
    report.m_ssim = sum_ms / n;
  }
  return report;
}

namespace detail {

inline std::string metric_cell(double v) {
  if (std::isnan(v)) return "n/a";
  if (std::isinf(v)) return std::to_string(kPsnrCsvCap);
  return std::to_string(v);
}

}  // namespace detail

/// CSV with Table-style headers; LPIPS and PIQE stay "n/a" columns for
/// layout parity with neural-metric tooling.
inline void write_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "frame,PSNR,SSIM,M.PSNR,M.SSIM,LPIPS,PIQE\n";
  for (const auto& fs : report.frames) {
    f << fs.frame << "," << detail::metric_cell(fs.psnr) << "," << detail::metric_cell(fs.ssim) << ","
      << detail::metric_cell(fs.m_psnr) << "," << detail::metric_cell(fs.m_ssim) << ",n/a,n/a\n";
  }
  f << "aggregate," << detail::metric_cell(report.psnr) << "," << detail::metric_cell(report.ssim) << ","
    << detail::metric_cell(report.m_psnr) << "," << detail::metric_cell(report.m_ssim) << ",n/a,n/a\n";
  if (!f) throw IoError("csv write failed: " + path);
}

inline nlohmann::json eval_report_json(const EvalReport& report) {
  const auto cell = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return "inf";
    return v;
  };
  nlohmann::json j;
  j["aggregate"] = {{"PSNR", cell(report.psnr)}, {"SSIM", cell(report.ssim)},
                    {"M.PSNR", cell(report.m_psnr)}, {"M.SSIM", cell(report.m_ssim)},
                    {"EPE", cell(report.epe)}, {"LPIPS", nullptr}, {"PIQE", nullptr}};
  j["frames"] = nlohmann::json::array();
  for (const auto& fs : report.frames)
    j["frames"].push_back({{"frame", fs.frame}, {"PSNR", cell(fs.psnr)}, {"SSIM", cell(fs.ssim)},
                           {"M.PSNR", cell(fs.m_psnr)}, {"M.SSIM", cell(fs.m_ssim)}});
  return j;
}

inline void write_eval_json(const EvalReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << eval_report_json(report).dump(2) << "\n";
}

}  // namespace scene4d
