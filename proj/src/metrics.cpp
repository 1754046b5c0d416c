#include "fvv/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>

namespace fvv {

namespace {

bool selected(const Mask *mask, std::size_t i) { return !mask || (*mask)[i] != 0; }

void check_support(std::size_t count, const char *what) {
  if (count == 0) throw UndefinedMetricError(std::string(what) + " over an empty mask");
}

}  // namespace

double mae(const ImageRgb &image, const ImageRgb &reference, const Mask *mask) {
  if (!image.same_shape(reference) || (mask && !mask->same_shape(image)))
    throw ConfigError("mae inputs are not aligned");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!selected(mask, i)) continue;
    for (int c = 0; c < 3; ++c) sum += std::abs(static_cast<double>(image[i][c]) - reference[i][c]);
    count += 3;
  }
  check_support(count, "mae");
  return 255.0 * sum / static_cast<double>(count);
}

double l2_rgb(const ImageRgb &prediction, const ImageRgb &truth, const Mask *mask) {
  if (!prediction.same_shape(truth) || (mask && !mask->same_shape(truth)))
    throw ConfigError("l2 inputs are not aligned");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    if (!selected(mask, i)) continue;
    for (int c = 0; c < 3; ++c) {
      const double e = static_cast<double>(prediction[i][c]) - truth[i][c];
      sum += e * e;
    }
    count += 3;
  }
  check_support(count, "l2_rgb");
  return sum / static_cast<double>(count);
}

double l2_normal(const NormalMap &prediction, const Raster<Vec3> &truth, const Mask *mask) {
  if (!prediction.normals.same_shape(truth) || (mask && !mask->same_shape(truth)))
    throw ConfigError("l2 inputs are not aligned");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!selected(mask, i) || !prediction.valid[i]) continue;
    sum += (prediction.normals[i] - truth[i]).squaredNorm();
    count += 3;
  }
  check_support(count, "l2_normal");
  return sum / static_cast<double>(count);
}

double normal_consistency_residual(const DepthMap &depth, const NormalMap &target, const Mask *mask) {
  return normal_residual(depth, target, mask);
}

double depth_mae(const DepthMap &depth, const ScalarMap &truth, const Mask *mask) {
  if (!depth.depth.same_shape(truth)) throw ConfigError("depth mae inputs are not aligned");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!selected(mask, i) || !std::isfinite(depth.depth[i]) || !std::isfinite(truth[i])) continue;
    sum += std::abs(depth.depth[i] - truth[i]);
    ++count;
  }
  check_support(count, "depth_mae");
  return sum / static_cast<double>(count);
}

double normal_mean_angle_deg(const NormalMap &prediction, const Raster<Vec3> &truth, const Mask *mask) {
  if (!prediction.normals.same_shape(truth)) throw ConfigError("normal angle inputs are not aligned");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!selected(mask, i) || !prediction.valid[i] || !(truth[i].squaredNorm() > 0.0)) continue;
    const Vec3 &a = prediction.normals[i];
    const Vec3 &b = truth[i];
    sum += degrees(std::atan2(a.cross(b).norm(), a.dot(b)));
    ++count;
  }
  check_support(count, "normal angle");
  return sum / static_cast<double>(count);
}

void EvalReport::finalize() {
  aggregate = ViewMetrics{};
  aggregate.view_id = -1;
  aggregate.cameras = rig_size;
  if (views.empty()) return;
  const double n = static_cast<double>(views.size());
  for (const auto &v : views) {
    aggregate.mae_fg += v.mae_fg / n;
    aggregate.mae_full += v.mae_full / n;
    aggregate.l2_rgb += v.l2_rgb / n;
    aggregate.l2_normal += v.l2_normal / n;
    aggregate.combined += v.combined / n;
    aggregate.depth_mae += v.depth_mae / n;
    aggregate.normal_mean_angle_deg += v.normal_mean_angle_deg / n;
  }
}

namespace {

nlohmann::json metrics_json(const ViewMetrics &m) {
  return {{"view_id", m.view_id},     {"cameras", m.cameras},
          {"mae_fg", m.mae_fg},       {"mae_full", m.mae_full},
          {"l2_rgb", m.l2_rgb},       {"l2_normal", m.l2_normal},
          {"combined", m.combined},   {"depth_mae", m.depth_mae},
          {"normal_mean_angle_deg", m.normal_mean_angle_deg}};
}

nlohmann::json report_json(const EvalReport &r) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto &v : r.views) views.push_back(metrics_json(v));
  return {{"scene", r.scene}, {"rig_size", r.rig_size}, {"low_res", r.low_res}, {"hi_res", r.hi_res},
          {"k", r.k},         {"lambda", r.lambda},     {"views", views},       {"aggregate", metrics_json(r.aggregate)}};
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport &report) { return report_json(report).dump(2) + "\n"; }

std::string reports_to_json(const std::vector<EvalReport> &reports) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto &r : reports) doc.push_back(report_json(r));
  return doc.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<EvalReport> &reports) {
  std::ostringstream out;
  out << "view_id,cameras,mae_fg,mae_full,l2_rgb,l2_normal,combined,depth_mae,normal_mean_angle_deg\n";
  for (const auto &r : reports)
    for (const auto &v : r.views)
      out << v.view_id << ',' << v.cameras << ',' << number(v.mae_fg) << ',' << number(v.mae_full) << ','
          << number(v.l2_rgb) << ',' << number(v.l2_normal) << ',' << number(v.combined) << ','
          << number(v.depth_mae) << ',' << number(v.normal_mean_angle_deg) << '\n';
  return out.str();
}

}  // namespace fvv
