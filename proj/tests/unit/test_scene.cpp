#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace fvv;
using namespace fvv::testing;

namespace {

AnalyticScene single(Primitive p) {
  AnalyticScene s;
  s.primitives.push_back(p);
  return s;
}

Primitive sphere(Vec3 c, double r) {
  Primitive p;
  p.shape = Primitive::Shape::Sphere;
  p.center = c;
  p.radius = r;
  return p;
}

Vec3 sdf_gradient(const AnalyticScene &s, const Vec3 &p) {
  const double h = 1e-5;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    g[a] = (s.sdf(p + e) - s.sdf(p - e)) / (2 * h);
  }
  return g.normalized();
}

}  // namespace

TEST_CASE("scene signed distance") {
  const AnalyticScene unit = single(sphere(Vec3::Zero(), 1.0));
  CHECK(scene_sdf(unit, Vec3(2, 0, 0)) == doctest::Approx(1.0));
  CHECK(scene_sdf(unit, Vec3::Zero()) == doctest::Approx(-1.0));

  AnalyticScene two = two_sphere_scene();
  const Vec3 x(0.1, 0.7, -0.4);
  const double a = (x - Vec3(0.7, 0, 0)).norm() - 0.4;
  const double b = (x - Vec3(-0.5, 0, 0.2)).norm() - 0.55;
  CHECK(scene_sdf(two, x) == doctest::Approx(std::min(a, b)));

  Primitive box;
  box.shape = Primitive::Shape::Box;
  box.half_extents = Vec3::Ones();
  CHECK(box.sdf(Vec3(2, 0, 0)) == doctest::Approx(1.0));
  CHECK(box.sdf(Vec3(2, 2, 0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(box.sdf(Vec3(0.5, 0, 0)) == doctest::Approx(-0.5));

  Primitive capsule;
  capsule.shape = Primitive::Shape::Capsule;
  capsule.end_a = Vec3(0, -1, 0);
  capsule.end_b = Vec3(0, 1, 0);
  capsule.radius = 0.5;
  CHECK(capsule.sdf(Vec3(2, 0, 0)) == doctest::Approx(1.5));
  CHECK(capsule.sdf(Vec3(0, 3, 0)) == doctest::Approx(1.5));

  CHECK_THROWS_AS(AnalyticScene{}.validate(), ValidationError);
}

TEST_CASE("ground truth of an on-axis sphere") {
  const AnalyticScene scene = sphere_checker_scene();
  // Odd resolution puts a pixel center on the optical axis.
  const Camera cam = Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), 400, 400, 255, 255);
  const auto gt = gt_render(scene, cam, 1);
  CHECK(gt.depth(127, 127) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK((gt.normal(127, 127) - Vec3(0, 0, -1)).norm() < 1e-6);

  for (std::size_t i = 0; i < gt.mask.size(); ++i) {
    CHECK_EQ(gt.mask[i] != 0, std::isfinite(gt.depth[i]));
    if (gt.mask[i]) CHECK(std::abs(gt.normal[i].norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("silhouette area matches the projected disk") {
  const AnalyticScene scene = sphere_checker_scene();
  const double f = 500.0, d = 3.0, r = 1.0;
  const Camera cam = Camera::look_at(Vec3(d, 0, 0), Vec3::Zero(), f, f, 512, 512);
  const auto gt = gt_render(scene, cam);
  std::size_t count = 0;
  for (auto m : gt.mask.data()) count += m;
  // Image radius of the tangent cone: f * tan(asin(r / d)).
  const double rho = f * r / std::sqrt(d * d - r * r);
  const double area = kPi * rho * rho;
  CHECK(std::abs(count - area) / area < 0.01);
}

TEST_CASE("sphere tracing agrees with the closed form") {
  // A capsule with coincident ends is a sphere, but it is sphere traced.
  Primitive cap;
  cap.shape = Primitive::Shape::Capsule;
  cap.end_a = cap.end_b = Vec3(0.2, -0.1, 0.3);
  cap.radius = 0.8;
  const AnalyticScene scene = single(cap);
  const double diag = scene.bounds().diagonal();
  const Camera cam = Camera::look_at(Vec3(2.5, 0.4, -1.5), cap.end_a, 120, 120, 96, 96);
  const auto gt = gt_render(scene, cam);
  int compared = 0;
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) {
      const auto truth = sphere_depth(cam, Vec2(x, y), cap.end_a, cap.radius);
      if (!truth || !gt.mask(x, y)) continue;
      CHECK(std::abs(gt.depth(x, y) - *truth) <= 1e-6 * diag);
      ++compared;
    }
  CHECK(compared > 1000);
}

TEST_CASE("ground-truth normals follow the sdf gradient") {
  AnalyticScene scene;
  Primitive box;
  box.shape = Primitive::Shape::Box;
  box.center = Vec3(0.3, 0, 0);
  box.half_extents = Vec3(0.5, 0.4, 0.6);
  Primitive cap;
  cap.shape = Primitive::Shape::Capsule;
  cap.end_a = Vec3(-0.8, -0.5, 0);
  cap.end_b = Vec3(-0.6, 0.6, 0.2);
  cap.radius = 0.3;
  scene.primitives = {box, cap};
  const Camera cam = Camera::look_at(Vec3(1.7, 1.1, -2.6), Vec3::Zero(), 100, 100, 80, 80);
  const auto gt = gt_render(scene, cam);
  int compared = 0;
  double worst = 0.0;
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 80; ++x) {
      if (!gt.mask(x, y)) continue;
      const Vec3 X = unproject(cam, Vec2(x, y), gt.depth(x, y));
      // Box edges have no unique gradient; skip points near them.
      const Vec3 q = (X - box.center).cwiseAbs() - box.half_extents;
      int near_faces = 0;
      for (int a = 0; a < 3; ++a) near_faces += std::abs(q[a]) < 1e-3;
      if (near_faces > 1) continue;
      const Vec3 n_cam = cam.rotation * sdf_gradient(scene, X);
      worst = std::max(worst, degrees(std::acos(std::clamp(n_cam.dot(gt.normal(x, y)), -1.0, 1.0))));
      ++compared;
    }
  CHECK(compared > 500);
  CHECK(worst < 0.1);
}

TEST_CASE("ground-truth masks") {
  const AnalyticScene scene = sphere_checker_scene();
  const CameraRig rig = ring(6, 64);
  const auto masks = gt_masks(scene, rig);
  REQUIRE(masks.size() == 6);
  for (const auto &m : masks) {
    std::size_t count = 0;
    for (auto v : m.data()) count += v;
    CHECK(count > 0);
  }
  CameraRig away = rig;
  away.cameras[0] = Camera::look_at(Vec3(3, 0, 0), Vec3(6, 0, 0), 57.6, 57.6, 64, 64);
  const auto gt = gt_render(scene, away.cameras[0]);
  std::size_t count = 0;
  for (auto v : gt.mask.data()) count += v;
  CHECK(count == 0);
  const auto gt1 = gt_render(scene, rig.cameras[1]);
  CHECK(gt1.mask == masks[1]);
}

TEST_CASE("scene files") {
  const AnalyticScene scene = two_sphere_scene();
  const auto path = std::filesystem::temp_directory_path() / "fvv_scene_roundtrip.json";
  save_scene(scene, path);
  const AnalyticScene back = load_scene(path);
  CHECK(scene_to_json(back) == scene_to_json(scene));
  std::filesystem::remove(path);
  CHECK(scene_to_json(load_scene(fixture("sphere_checker.json"))) == scene_to_json(sphere_checker_scene()));
  CHECK_THROWS_AS(load_scene(fixture("scene_unknown_shape.json")), ParseError);
  CHECK_THROWS_AS(scene_from_json("{\"primitives\": 3}"), ParseError);
  CHECK_THROWS_AS(scene_from_json("{\"primitives\": [{\"shape\": \"sphere\"}]}"), ParseError);
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.json"), InputError);
}

TEST_CASE("checker albedo alternates") {
  Albedo a;
  a.kind = Albedo::Kind::Checker;
  a.frequency = 8.0;
  const Color c0 = a.at(Vec3(0.01, 0.01, 0.01));
  const Color c1 = a.at(Vec3(0.01 + 1.0 / 8.0, 0.01, 0.01));
  CHECK((c0 - c1).norm() > 0.1f);
  CHECK((c0 - a.at(Vec3(0.01 + 2.0 / 8.0, 0.01, 0.01))).norm() == 0.0f);
}
