#pragma once

#include "fvv/normals.hpp"
#include "fvv/raster.hpp"

#include <string>
#include <vector>

namespace fvv {

/// Mean absolute error over masked pixels and channels on the [0,255] scale.
/// A null mask means every pixel. Throws UndefinedMetricError on empty support.
double mae(const ImageRgb &image, const ImageRgb &reference, const Mask *mask = nullptr);

/// Mean squared error over masked pixels and channels (native [0,1] scale).
double l2_rgb(const ImageRgb &prediction, const ImageRgb &truth, const Mask *mask = nullptr);

/// Mean squared error over masked pixels and vector components; pixels where
/// the prediction is invalid are skipped.
double l2_normal(const NormalMap &prediction, const Raster<Vec3> &truth, const Mask *mask = nullptr);

inline double combined_loss(double l2_rgb_value, double l2_normal_value, double lambda) {
  return lambda * l2_rgb_value + (1.0 - lambda) * l2_normal_value;
}

/// Mean |n(depth) - target|^2 (the normal consistency objective).
double normal_consistency_residual(const DepthMap &depth, const NormalMap &target, const Mask *mask = nullptr);

/// Mean |depth - truth| over masked pixels where both are foreground.
double depth_mae(const DepthMap &depth, const ScalarMap &truth, const Mask *mask = nullptr);

/// Mean angle in degrees between valid predicted normals and the truth.
double normal_mean_angle_deg(const NormalMap &prediction, const Raster<Vec3> &truth, const Mask *mask = nullptr);

struct ViewMetrics {
  int view_id = 0;
  int cameras = 0;
  double mae_fg = 0.0;
  double mae_full = 0.0;
  double l2_rgb = 0.0;
  double l2_normal = 0.0;
  double combined = 0.0;
  double depth_mae = 0.0;
  double normal_mean_angle_deg = 0.0;
};

struct EvalReport {
  std::string scene;
  int rig_size = 0;
  int low_res = 0;
  int hi_res = 0;
  double k = 0.0;
  double lambda = 0.5;
  std::vector<ViewMetrics> views;
  ViewMetrics aggregate;

  /// Recomputes `aggregate` as the mean of the per-view metrics.
  void finalize();
};

std::string report_to_json(const EvalReport &report);
std::string reports_to_json(const std::vector<EvalReport> &reports);
/// One row per view: view_id, cameras, then the metric columns.
std::string reports_to_csv(const std::vector<EvalReport> &reports);

}  // namespace fvv
