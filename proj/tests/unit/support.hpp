#pragma once

#include "fvv/camera.hpp"
#include "fvv/depth_render.hpp"
#include "fvv/hull.hpp"
#include "fvv/scene.hpp"

#include <cmath>
#include <optional>
#include <random>

namespace fvv::testing {

inline const char *fixture(const char *name) {
  static thread_local std::string path;
  path = std::string(FVV_FIXTURE_DIR) + "/" + name;
  return path.c_str();
}

/// Nearest ray parameter where the ray meets a sphere, computed in closed form.
inline std::optional<double> ray_sphere(const Vec3 &origin, const Vec3 &dir, const Vec3 &center, double radius) {
  const Vec3 oc = origin - center;
  const double a = dir.squaredNorm();
  const double b = 2.0 * oc.dot(dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = (-b - s) / (2.0 * a);
  const double t1 = (-b + s) / (2.0 * a);
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return std::nullopt;
}

/// Camera-space depth of the unit-sphere surface seen through `pixel`, from
/// the pinhole model written out by hand.
inline std::optional<double> sphere_depth(const Camera &cam, const Vec2 &pixel, const Vec3 &center = Vec3::Zero(),
                                          double radius = 1.0) {
  const Vec3 d_cam((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0);
  const Vec3 d_world = cam.rotation.transpose() * d_cam;
  const Vec3 origin = -cam.rotation.transpose() * cam.translation;
  const auto t = ray_sphere(origin, d_world, center, radius);
  if (!t) return std::nullopt;
  return *t;  // d_cam has z = 1, so the parameter is the camera depth
}

inline CameraRig ring(int n = 6, int res = 256) { return make_rig(n, 3.0, 0.0, Vec3::Zero(), res, 0.9 * res); }

inline Aabb unit_volume(double half = 1.2) { return {Vec3::Constant(-half), Vec3::Constant(half)}; }

inline VoxelHull sphere_hull(int n = 6, int res = 256) {
  const auto scene = sphere_checker_scene();
  const auto rig = ring(n, res);
  const auto box = unit_volume();
  return carve(rig, gt_masks(scene, rig), box, default_carve_spacing(box));
}

inline Vec3 random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

}  // namespace fvv::testing
