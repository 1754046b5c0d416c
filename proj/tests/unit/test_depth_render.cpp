#include "support.hpp"

#include "fvv/depth_render.hpp"
#include "fvv/field.hpp"

#include <doctest.h>

#include <atomic>
#include <cstring>

using namespace fvv;
using namespace fvv::testing;

namespace {

class CountingField final : public OccupancyField {
 public:
  explicit CountingField(const OccupancyField &inner) : inner_(inner) {}
  double occupancy(const Vec3 &p, double depth) const override {
    ++count;
    return inner_.occupancy(p, depth);
  }
  double offset(const Vec3 &a, const Vec3 &b) const override { return inner_.offset(a, b); }
  mutable std::atomic<std::size_t> count{0};

 private:
  const OccupancyField &inner_;
};

/// Offset that never finds a crossing, so refinement keeps the midpoint.
class MidpointField final : public OccupancyField {
 public:
  explicit MidpointField(const OccupancyField &inner) : inner_(inner) {}
  double occupancy(const Vec3 &p, double depth) const override { return inner_.occupancy(p, depth); }
  double offset(const Vec3 &, const Vec3 &) const override { throw NoCrossingError("none"); }

 private:
  const OccupancyField &inner_;
};

class FixedOffsetField final : public OccupancyField {
 public:
  FixedOffsetField(const OccupancyField &inner, double o) : inner_(inner), o_(o) {}
  double occupancy(const Vec3 &p, double depth) const override { return inner_.occupancy(p, depth); }
  double offset(const Vec3 &, const Vec3 &) const override { return o_; }

 private:
  const OccupancyField &inner_;
  double o_;
};

const VoxelHull &hull6() {
  static const VoxelHull h = sphere_hull(6, 256);
  return h;
}

const AnalyticField &unit_field() {
  static const AnalyticField f(sphere_checker_scene(), 0.01);
  return f;
}

Camera axis_camera(int res = 65) { return Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), 0.9 * res, 0.9 * res, res, res); }

Camera off_ring_target(int res = 256) { return orbit_camera(Vec3::Zero(), 30.0, 15.0, 3.0, res, 0.9 * res); }

bool bits_equal(const ScalarMap &a, const ScalarMap &b) {
  return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("axis ray localizes the front of the sphere") {
  const Camera cam = axis_camera();
  const Vec2 px(32, 32);
  SampleSpec spec;
  spec.spacing = 0.05;
  const Ray ray = pixel_ray(cam, px);
  const auto interval = ray_hull_interval(hull6(), ray);
  REQUIRE(interval);
  const auto window = hull_window(cam, ray, *interval, spec);
  CountingField counted(unit_field());
  const auto found = localize_depth(cam, px, window, counted, spec);
  REQUIRE(found.crossing);
  CHECK(std::abs(found.crossing->midpoint_depth - 2.0) <= spec.spacing / 2);
  CHECK(std::abs(refine_depth(*found.crossing, unit_field(), spec) - 2.0) <= 1e-3);
  CHECK(found.evaluations == counted.count.load());

  const double z_near = depth_along_ray(cam, ray, interval->t_near);
  CHECK(found.evaluations <= static_cast<std::size_t>(std::ceil((2.0 - z_near) / spec.spacing)) + 1);
}

TEST_CASE("offset composition") {
  const Camera cam = axis_camera();
  const Vec2 px(32, 32);
  SampleSpec spec;
  spec.spacing = 0.05;
  const Ray ray = pixel_ray(cam, px);
  const auto window = hull_window(cam, ray, *ray_hull_interval(hull6(), ray), spec);
  const auto found = localize_depth(cam, px, window, unit_field(), spec);
  REQUIRE(found.crossing);
  const Crossing &c = *found.crossing;
  CHECK(refine_depth(c, FixedOffsetField(unit_field(), 0.0), spec) == doctest::Approx(c.midpoint_depth).epsilon(1e-12));
  CHECK(refine_depth(c, FixedOffsetField(unit_field(), -1.0), spec) == c.depth_a);
  CHECK(refine_depth(c, FixedOffsetField(unit_field(), 1.0), spec) == doctest::Approx(c.depth_b).epsilon(1e-12));
  CHECK(refine_depth(c, MidpointField(unit_field()), spec) == c.midpoint_depth);

  SampleSpec literal = spec;
  literal.literal_offset_composition = true;
  CHECK(refine_depth(c, FixedOffsetField(unit_field(), 0.0), literal) ==
        doctest::Approx(c.midpoint_depth + spec.spacing / 2).epsilon(1e-12));
}

TEST_CASE("rays that miss the hull cost nothing") {
  const Camera cam = axis_camera();
  const Ray ray = pixel_ray(cam, Vec2(0, 0));
  CHECK_FALSE(ray_hull_interval(hull6(), ray));

  Mask corner(cam.width, cam.height, 0);
  corner(0, 0) = 1;
  corner(64, 64) = 1;
  CountingField counted(unit_field());
  RenderOptions opts;
  opts.pixels = &corner;
  const auto out = render_depth(cam, hull6(), counted, SampleSpec{}, opts);
  CHECK(out.evaluations == 0);
  CHECK(counted.count.load() == 0);
  CHECK(out.map.foreground_count() == 0);

  const Camera away = Camera::look_at(Vec3(0, 0, -3), Vec3(0, 0, -6), 50, 50, 48, 48);
  const auto bg = render_depth(away, hull6(), unit_field(), SampleSpec{});
  CHECK(bg.map.foreground_count() == 0);
  CHECK(bg.evaluations == 0);
  for (double d : bg.map.depth.data()) CHECK(d == kBackgroundDepth);
}

TEST_CASE("off-ring target against the analytic depth") {
  const Camera cam = off_ring_target();
  SampleSpec spec;
  spec.spacing = default_sample_spacing(hull_aabb(hull6()));
  const auto mid = render_depth(cam, hull6(), MidpointField(unit_field()), spec);
  const auto refined = render_depth(cam, hull6(), unit_field(), spec);

  std::size_t fg = 0, mid_ok = 0, ref_half = 0, ref_ok = 0, mismatched = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const auto truth = sphere_depth(cam, Vec2(x, y));
      if (!truth) {
        if (refined.map.foreground(x, y)) ++mismatched;
        continue;
      }
      ++fg;
      if (std::abs(mid.map.depth(x, y) - *truth) <= spec.spacing / 2) ++mid_ok;
      if (std::abs(refined.map.depth(x, y) - *truth) <= spec.spacing / 2) ++ref_half;
      if (std::abs(refined.map.depth(x, y) - *truth) <= 2e-3) ++ref_ok;
    }
  REQUIRE(fg > 10000);
  CHECK(static_cast<double>(mid_ok) / fg >= 0.99);
  CHECK(static_cast<double>(ref_half) / fg >= 0.99);
  CHECK(static_cast<double>(ref_ok) / fg >= 0.95);
  CHECK(mismatched == 0);
}

TEST_CASE("rendering is deterministic across worker counts") {
  const Camera cam = off_ring_target(96);
  SampleSpec spec;
  spec.spacing = 0.02;
  RenderOptions one;
  one.workers = 1;
  RenderOptions many;
  many.workers = 4;
  const auto a = render_depth(cam, hull6(), unit_field(), spec, one);
  const auto b = render_depth(cam, hull6(), unit_field(), spec, many);
  const auto c = render_depth(cam, hull6(), unit_field(), spec, many);
  CHECK(bits_equal(a.map.depth, b.map.depth));
  CHECK(bits_equal(b.map.depth, c.map.depth));
  CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("bracketing pairs are one step apart") {
  const Camera cam = off_ring_target(64);
  SampleSpec spec;
  spec.spacing = 0.02;
  int checked = 0;
  for (int y = 0; y < cam.height; y += 3)
    for (int x = 0; x < cam.width; x += 3) {
      const Ray ray = pixel_ray(cam, Vec2(x, y));
      const auto interval = ray_hull_interval(hull6(), ray);
      if (!interval) continue;
      const auto found = localize_depth(cam, Vec2(x, y), hull_window(cam, ray, *interval, spec), unit_field(), spec);
      if (!found.crossing) continue;
      const Crossing &c = *found.crossing;
      CHECK(std::abs((c.depth_b - c.depth_a) - spec.spacing) <= 1e-12);
      CHECK(unit_field().occupancy(c.a, c.depth_a) < 0.5);
      CHECK(unit_field().occupancy(c.b, c.depth_b) >= 0.5);
      CHECK(cam.to_camera(c.a).z() == doctest::Approx(c.depth_a).epsilon(1e-12));
      CHECK(cam.to_camera(c.b).z() == doctest::Approx(c.depth_b).epsilon(1e-12));
      ++checked;
    }
  CHECK(checked > 50);
}

TEST_CASE("coarse and dense lattices agree") {
  const Camera cam = off_ring_target(64);
  SampleSpec coarse;
  coarse.spacing = 0.02;
  SampleSpec dense = coarse;
  dense.spacing = coarse.spacing / 64;
  dense.max_samples = 1 << 16;
  int checked = 0;
  for (int y = 0; y < cam.height; y += 2)
    for (int x = 0; x < cam.width; x += 2) {
      const Ray ray = pixel_ray(cam, Vec2(x, y));
      const auto interval = ray_hull_interval(hull6(), ray);
      if (!interval) continue;
      const auto a = localize_depth(cam, Vec2(x, y), hull_window(cam, ray, *interval, coarse), unit_field(), coarse);
      const auto b = localize_depth(cam, Vec2(x, y), hull_window(cam, ray, *interval, dense), unit_field(), dense);
      CHECK(a.crossing.has_value() == b.crossing.has_value());
      if (!a.crossing || !b.crossing) continue;
      CHECK(std::abs(a.crossing->midpoint_depth - b.crossing->midpoint_depth) <=
            coarse.spacing / 2 + dense.spacing / 2 + 1e-12);
      ++checked;
    }
  CHECK(checked > 200);
}

TEST_CASE("pruning and early termination only save work") {
  const Camera cam = off_ring_target(80);
  SampleSpec spec;
  spec.spacing = 0.02;
  RenderOptions pruned;
  RenderOptions full;
  full.prune = false;
  SampleSpec exhaustive = spec;
  exhaustive.early_termination = false;

  const auto base = render_depth(cam, hull6(), unit_field(), spec, pruned);
  const auto no_prune = render_depth(cam, hull6(), unit_field(), spec, full);
  const auto no_stop = render_depth(cam, hull6(), unit_field(), exhaustive, pruned);
  const auto neither = render_depth(cam, hull6(), unit_field(), exhaustive, full);
  CHECK(bits_equal(base.map.depth, no_prune.map.depth));
  CHECK(bits_equal(base.map.depth, no_stop.map.depth));
  CHECK(bits_equal(base.map.depth, neither.map.depth));
  CHECK(base.evaluations < no_prune.evaluations);
  CHECK(base.evaluations < no_stop.evaluations);
  CHECK(no_stop.evaluations < neither.evaluations);
  CHECK(neither.evaluations >= 5 * base.evaluations);
}

TEST_CASE("render input validation") {
  VoxelHull empty = hull6();
  std::fill(empty.occupancy.begin(), empty.occupancy.end(), 0);
  CHECK_THROWS_AS(render_depth(axis_camera(), empty, unit_field(), SampleSpec{}), EmptyHullError);
  SampleSpec bad;
  bad.spacing = 0.0;
  CHECK_THROWS_AS(render_depth(axis_camera(), hull6(), unit_field(), bad), ConfigError);
  Mask wrong(3, 3, 1);
  RenderOptions opts;
  opts.pixels = &wrong;
  CHECK_THROWS_AS(render_depth(axis_camera(), hull6(), unit_field(), SampleSpec{}, opts), ConfigError);
}
