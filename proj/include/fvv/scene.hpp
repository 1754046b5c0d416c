#pragma once

#include "fvv/camera.hpp"
#include "fvv/raster.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fvv {

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return extent().norm(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  bool degenerate() const { return !((hi.array() > lo.array()).all()); }
  bool contains(const Vec3 &p) const { return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all(); }
};

/// Parametric slab intersection of a ray with a box; false on miss.
bool intersect_aabb(const Aabb &box, const Vec3 &origin, const Vec3 &direction, double &t_near, double &t_far);

struct Albedo {
  enum class Kind { Solid, Checker, Stripes };
  Kind kind = Kind::Solid;
  Color color_a{0.8f, 0.8f, 0.8f};
  Color color_b{0.1f, 0.1f, 0.1f};
  double frequency = 8.0;  // cells per scene unit
  int axis = 1;            // stripes only

  Color at(const Vec3 &p) const;
};

struct Primitive {
  enum class Shape { Sphere, Capsule, Box };
  Shape shape = Shape::Sphere;
  Vec3 center = Vec3::Zero();        // sphere / box center
  double radius = 1.0;               // sphere / capsule radius
  Vec3 end_a = Vec3::Zero();         // capsule segment
  Vec3 end_b = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();  // box
  Albedo albedo;

  double sdf(const Vec3 &p) const;
  Aabb bounds() const;
};

/// Union of SDF primitives with procedural albedo and a fixed directional
/// light. Shading depends only on the surface point, never on the viewer.
struct AnalyticScene {
  std::vector<Primitive> primitives;
  Vec3 light_direction = Vec3(0.3, 0.8, -0.5).normalized();
  double ambient = 0.35;

  void validate() const;
  Aabb bounds() const;

  double sdf(const Vec3 &p) const;
  /// Index of the primitive with the smallest SDF at p.
  std::size_t closest_primitive(const Vec3 &p) const;
  Vec3 normal(const Vec3 &p) const;
  Color shade(const Vec3 &p) const;
};

double scene_sdf(const AnalyticScene &scene, const Vec3 &p);

/// Canonical fixtures: a checkered unit sphere at the origin, and a pair of
/// spheres arranged so the near one occludes the far one from some ring views.
AnalyticScene sphere_checker_scene();
AnalyticScene two_sphere_scene();

std::string scene_to_json(const AnalyticScene &scene);
AnalyticScene scene_from_json(const std::string &text);
AnalyticScene load_scene(const std::filesystem::path &path);
void save_scene(const AnalyticScene &scene, const std::filesystem::path &path);

struct GroundTruthRender {
  ImageRgb rgb;
  ScalarMap depth;             // camera-space z, +inf on background
  Raster<Vec3> normal;         // camera frame, facing the camera
  Mask mask;
};

/// Closest hit of a pixel ray against the scene: ray parameter, or +inf.
double trace_scene(const AnalyticScene &scene, const Ray &ray, double max_t);

GroundTruthRender gt_render(const AnalyticScene &scene, const Camera &cam, unsigned workers = 0);

std::vector<Mask> gt_masks(const AnalyticScene &scene, const CameraRig &rig, unsigned workers = 0);

}  // namespace fvv
