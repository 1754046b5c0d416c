#include "support.hpp"

#include "fvv/blend.hpp"
#include "fvv/field.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>

using namespace fvv;
using namespace fvv::testing;

namespace {

DepthMap depth_of(const Camera &cam, const ScalarMap &depth) {
  DepthMap m(cam);
  m.depth = depth;
  return m;
}

ScalarMap row(std::initializer_list<double> v) {
  ScalarMap m(static_cast<int>(v.size()), 1, 0.0);
  int i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

struct OnePixel {
  WarpedImage image1{ImageRgb(1, 1, Color::Zero()), Mask(1, 1, 1)};
  WarpedImage image2{ImageRgb(1, 1, Color::Zero()), Mask(1, 1, 1)};
  OcclusionMap occ1{ScalarMap(1, 1, 0.0), Mask(1, 1, 1)};
  OcclusionMap occ2{ScalarMap(1, 1, 0.0), Mask(1, 1, 1)};
  ScalarMap a1{1, 1, 1.0};
  ScalarMap a2{1, 1, 1.0};

  double weight(const HeuristicBlendProvider &p) const {
    return p.weights(BlendInputs{image1, occ1, a1, image2, occ2, a2})(0, 0);
  }
};

}  // namespace

TEST_CASE("adjacent view selection") {
  const auto rig = ring(6, 64);
  const auto at = [&](double yaw, double pitch = 0.0) {
    return select_adjacent_views(rig, orbit_camera(Vec3::Zero(), yaw, pitch, 3.0, 64, 57.6));
  };
  CHECK(at(25).first == 0);
  CHECK(at(25).second == 1);
  CHECK(at(35).first == 1);
  CHECK(at(35).second == 0);
  CHECK(at(-10).first == 0);
  CHECK(at(-10).second == 5);
  CHECK(at(181).first == 3);
  CHECK(at(181).second == 4);
  CHECK(at(100, 40).first == 2);
  CHECK(at(60).first == 1);

  CameraRig single;
  single.cameras = {rig.cameras[0]};
  CHECK_THROWS_AS(select_adjacent_views(single, rig.cameras[1]), ConfigError);
}

TEST_CASE("warping into the source view itself is the identity") {
  const auto scene = sphere_checker_scene();
  const Camera cam = ring(6, 96).cameras[1];
  const auto gt = gt_render(scene, cam);
  const DepthMap depth = depth_of(cam, gt.depth);
  const auto warped = warp_image(cam, gt.rgb, depth, &gt.mask);
  std::size_t fg = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      if (!gt.mask(x, y)) {
        CHECK(warped.valid(x, y) == 0);
        CHECK(warped.rgb(x, y) == Color::Zero());
        continue;
      }
      ++fg;
      REQUIRE(warped.valid(x, y) == 1);
      CHECK((warped.rgb(x, y) - gt.rgb(x, y)).cwiseAbs().maxCoeff() <= 1e-6f);
    }
  CHECK(fg > 1000);

  const auto wd = warp_depth(depth, depth);
  const auto rp = reproject_depth(cam, depth);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      CHECK(wd.valid(x, y) == gt.mask(x, y));
      CHECK(rp.valid(x, y) == gt.mask(x, y));
      if (!gt.mask(x, y)) continue;
      CHECK(std::abs(wd.values(x, y) - gt.depth(x, y)) <= 1e-9);
      CHECK(std::abs(rp.values(x, y) - gt.depth(x, y)) <= 1e-9);
    }
  const auto occ = occlusion_map(wd, rp);
  for (std::size_t i = 0; i < occ.values.size(); ++i)
    if (occ.valid[i]) CHECK(std::abs(occ.values[i]) <= 1e-9);

  const auto align = view_alignment(cam, depth);
  for (std::size_t i = 0; i < align.size(); ++i) CHECK(align[i] == doctest::Approx(gt.mask[i] ? 1.0 : 0.0));
}

TEST_CASE("a sideways shift over a fronto-parallel plane") {
  // Target sits delta to the right of the source; a plane at depth z moves
  // every pixel by f * delta / z in the source image.
  const int w = 64, h = 16;
  const double f = 100.0, delta = 0.1, z = 2.0;
  const Camera src = Camera::make(f, f, 31.5, 7.5, w, h, Mat3::Identity(), Vec3::Zero());
  const Camera tgt = Camera::make(f, f, 31.5, 7.5, w, h, Mat3::Identity(), Vec3(-delta, 0, 0));
  ImageRgb ramp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ramp(x, y) = Color(x / 63.0f, 0.5f, 1.0f - x / 63.0f);
  DepthMap plane(tgt);
  plane.depth = ScalarMap(w, h, z);
  for (int y = 0; y < h; ++y) plane.depth(0, y) = kBackgroundDepth;

  const auto warped = warp_image(src, ramp, plane);
  const double shift = f * delta / z;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x == 0) {
        CHECK(warped.valid(x, y) == 0);
        continue;
      }
      const double sx = x + shift;
      if (sx > w - 1) {
        if (sx > w - 0.5) CHECK(warped.valid(x, y) == 0);
        continue;
      }
      REQUIRE(warped.valid(x, y) == 1);
      CHECK(std::abs(warped.rgb(x, y)[0] - sx / 63.0) <= 1.0 / 255);
      CHECK(std::abs(warped.rgb(x, y)[2] - (1.0 - sx / 63.0)) <= 1.0 / 255);
    }
  CHECK_THROWS_AS(warp_image(src, ImageRgb(3, 3), plane), ConfigError);
}

TEST_CASE("occlusion between two spheres") {
  const auto scene = two_sphere_scene();
  const Vec3 near_c(0.7, 0, 0), far_c(-0.5, 0, 0.2);
  const double near_r = 0.4, far_r = 0.55, k = 0.02;
  const Camera src = ring(6, 128).cameras[0];  // on +x, looks through the near sphere
  const Camera tgt = orbit_camera(Vec3::Zero(), 90.0, 0.0, 3.0, 128, 115.2);
  const auto gs = gt_render(scene, src);
  const auto gtt = gt_render(scene, tgt);
  const DepthMap src_depth = depth_of(src, gs.depth);
  const DepthMap tgt_depth = depth_of(tgt, gtt.depth);
  const auto occ = occlusion_map(warp_depth(src_depth, tgt_depth), reproject_depth(src, tgt_depth));

  std::size_t occluded = 0, visible = 0, visible_small = 0;
  for (int y = 0; y < tgt.height; ++y)
    for (int x = 0; x < tgt.width; ++x) {
      if (!occ.valid(x, y)) continue;
      const Vec3 X = unproject(tgt, Vec2(x, y), gtt.depth(x, y));
      if ((X - far_c).norm() > far_r + 1e-6) continue;  // only points on the far sphere
      // Distance from the near-sphere center to the source sight line.
      const Vec3 o = src.position();
      const Vec3 d = (X - o).normalized();
      const double along = (near_c - o).dot(d);
      const double miss = (near_c - o - along * d).norm();
      const bool in_front = along > 0 && along < (X - o).norm();
      if (in_front && miss < near_r - 0.05) {
        ++occluded;
        CHECK(occ.values(x, y) < -3 * k);
      } else if (!in_front || miss > near_r + 0.05) {
        // Also requires the source to see X itself: facing the source.
        if ((X - far_c).normalized().dot(-d) < 0.3) continue;
        ++visible;
        if (std::abs(occ.values(x, y)) < k) ++visible_small;
      }
    }
  CHECK(occluded > 50);
  CHECK(visible > 50);
  CHECK(static_cast<double>(visible_small) / visible > 0.95);
}

TEST_CASE("heuristic blend weights") {
  const HeuristicBlendProvider p(0.04, 4.0);
  OnePixel px;
  CHECK(px.weight(p) == 0.5);
  px.occ2.values(0, 0) = -0.04;
  CHECK(px.weight(p) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  px.occ1.values(0, 0) = 0.08;
  CHECK(px.weight(p) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
  px.occ1.values(0, 0) = 0.0;
  px.occ2.values(0, 0) = 0.0;
  px.a2(0, 0) = 0.9;
  CHECK(px.weight(p) == doctest::Approx(1.0 / (1.0 + std::exp(-0.4))));

  OnePixel only1;
  only1.image2.valid(0, 0) = 0;
  CHECK(only1.weight(p) == 1.0);
  OnePixel only2;
  only2.occ1.valid(0, 0) = 0;
  CHECK(only2.weight(p) == 0.0);
  OnePixel neither;
  neither.image1.valid(0, 0) = 0;
  neither.occ2.valid(0, 0) = 0;
  CHECK(neither.weight(p) == 0.5);

  CHECK_THROWS_AS(HeuristicBlendProvider(0.0, 4.0), ConfigError);
  CHECK_THROWS_AS(HeuristicBlendProvider(0.1, -1.0), ConfigError);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    OnePixel r;
    r.occ1.values(0, 0) = u(rng);
    r.occ2.values(0, 0) = u(rng);
    r.a1(0, 0) = u(rng);
    r.a2(0, 0) = u(rng);
    const double w = r.weight(p);
    CHECK((w >= 0.0 && w <= 1.0));
    std::swap(r.occ1, r.occ2);
    std::swap(r.a1, r.a2);
    CHECK(r.weight(p) == doctest::Approx(1.0 - w).epsilon(1e-9));
  }
}

TEST_CASE("blending is convex") {
  ImageRgb a(3, 1), b(3, 1);
  a(0, 0) = Color(1, 0, 0.5f);
  b(0, 0) = Color(0, 1, 0.25f);
  a(1, 0) = a(0, 0);
  b(1, 0) = b(0, 0);
  a(2, 0) = a(0, 0);
  b(2, 0) = b(0, 0);
  const auto out = blend(row({1.0, 0.0, 0.25}), a, b);
  CHECK(out(0, 0) == a(0, 0));
  CHECK(out(1, 0) == b(0, 0));
  CHECK(out(2, 0)[0] == doctest::Approx(0.25));
  CHECK(out(2, 0)[1] == doctest::Approx(0.75));
  CHECK(out(2, 0)[2] == doctest::Approx(0.3125));
  CHECK_THROWS_AS(blend(row({1.0}), a, b), ConfigError);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageRgb p(50, 1), q(50, 1);
  ScalarMap wmap(50, 1, 0.0);
  for (int i = 0; i < 50; ++i) {
    p(i, 0) = Color(u(rng), u(rng), u(rng));
    q(i, 0) = Color(u(rng), u(rng), u(rng));
    wmap(i, 0) = u(rng);
  }
  const auto mix = blend(wmap, p, q);
  for (int i = 0; i < 50; ++i)
    for (int c = 0; c < 3; ++c) {
      CHECK(mix(i, 0)[c] >= std::min(p(i, 0)[c], q(i, 0)[c]) - 1e-6f);
      CHECK(mix(i, 0)[c] <= std::max(p(i, 0)[c], q(i, 0)[c]) + 1e-6f);
    }
}

TEST_CASE("bilinear upsampling") {
  const auto up = bilinear_upsample(row({0.0, 1.0}), 4, 1);
  CHECK(up(0, 0) == 0.0);
  CHECK(up(1, 0) == doctest::Approx(0.25));
  CHECK(up(2, 0) == doctest::Approx(0.75));
  CHECK(up(3, 0) == 1.0);

  const auto same = bilinear_upsample(row({0.2, 0.7, 0.4}), 3, 1);
  CHECK(same(0, 0) == doctest::Approx(0.2));
  CHECK(same(1, 0) == doctest::Approx(0.7));
  CHECK(same(2, 0) == doctest::Approx(0.4));

  const Camera cam = Camera::make(4, 4, 1.5, 0.5, 4, 1, Mat3::Identity(), Vec3(0, 0, 3));
  DepthMap d(cam);
  d.depth = row({1.0, 2.0, 3.0, kBackgroundDepth});
  const auto dd = bilinear_upsample(d, 8, 2);
  CHECK(dd.camera == cam.resized(8, 2));
  CHECK(dd.depth(0, 0) == 1.0);
  CHECK(dd.depth(1, 0) == doctest::Approx(1.25));
  CHECK(dd.depth(2, 0) == doctest::Approx(1.75));
  CHECK(dd.depth(4, 0) == doctest::Approx(2.75));
  CHECK(dd.depth(5, 0) == kBackgroundDepth);  // touches the background tap
  CHECK(dd.depth(7, 1) == kBackgroundDepth);
}

TEST_CASE("morphology") {
  Mask m(7, 7, 0);
  m(3, 3) = 1;
  const Mask g = dilate(m, 1);
  CHECK(g.data() == dilate(g, 0).data());
  int count = 0;
  for (auto v : g.data()) count += v;
  CHECK(count == 9);
  CHECK(erode(g, 1)(3, 3) == 1);
  CHECK(erode(g, 1)(2, 3) == 0);
  CHECK(erode(Mask(5, 5, 1), 1)(0, 2) == 0);  // outside counts as background
  CHECK(erode(Mask(5, 5, 1), 1)(2, 2) == 1);
}

TEST_CASE("boundary-aware upsampling") {
  const auto scene = sphere_checker_scene();
  const auto rig = ring(6, 256);
  const auto box = unit_volume();
  const VoxelHull hull = carve(rig, gt_masks(scene, rig), box, default_carve_spacing(box));
  const AnalyticField field(scene, 0.01);
  SampleSpec spec;
  spec.spacing = default_sample_spacing(hull_aabb(hull));
  const double k = spec.spacing;

  const Camera hi = orbit_camera(Vec3::Zero(), 30.0, 15.0, 3.0, 256, 230.4);
  const Camera lo = hi.resized(64, 64);
  const DepthMap low = render_depth(lo, hull, field, spec).map;

  const auto plain = upsample_boundary_aware(low, hull, field, spec, 256, 256, 0);
  CHECK(plain.evaluations == 0);
  CHECK(std::count(plain.band.data().begin(), plain.band.data().end(), 1) == 0);
  CHECK(std::memcmp(plain.depth.depth.data().data(), plain.bilinear.depth.data().data(),
                    plain.depth.depth.size() * sizeof(double)) == 0);

  const auto up = upsample_boundary_aware(low, hull, field, spec, 256, 256, 2);
  CHECK(up.evaluations > 0);
  CHECK(up.depth.camera == hi);
  std::size_t band = 0, band_ok = 0, mismatch_outside = 0;
  double err_hat = 0.0, err_bil = 0.0;
  std::size_t both = 0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      const auto truth = sphere_depth(hi, Vec2(x, y));
      if (!up.band(x, y)) {
        CHECK(std::memcmp(&up.depth.depth(x, y), &up.bilinear.depth(x, y), sizeof(double)) == 0);
        if (up.bilinear.foreground(x, y) != truth.has_value()) ++mismatch_outside;
        continue;
      }
      if (!truth) continue;
      ++band;
      if (up.depth.foreground(x, y) && std::abs(up.depth.depth(x, y) - *truth) <= k / 2) ++band_ok;
      if (up.depth.foreground(x, y) && up.bilinear.foreground(x, y)) {
        ++both;
        err_hat += std::abs(up.depth.depth(x, y) - *truth);
        err_bil += std::abs(up.bilinear.depth(x, y) - *truth);
      }
    }
  REQUIRE(band > 500);
  CHECK(static_cast<double>(band_ok) / band >= 0.99);
  REQUIRE(both > 100);
  CHECK(err_hat < err_bil);
  CHECK(mismatch_outside == 0);

  // The band is exactly the dilated morphological gradient.
  const Mask expected = boundary_band(low.mask(), 2, 256, 256);
  CHECK(expected.data() == up.band.data());

  CHECK_THROWS_AS(upsample_boundary_aware(low, hull, field, spec, 32, 32, 2), ConfigError);
}
