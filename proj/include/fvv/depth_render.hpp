#pragma once

#include "fvv/camera.hpp"
#include "fvv/field.hpp"
#include "fvv/hull.hpp"
#include "fvv/raster.hpp"

#include <optional>

namespace fvv {

struct SampleSpec {
  double spacing = 0.01;  // k, in camera depth units
  int max_samples = 512;
  double occupancy_threshold = 0.5;
  bool early_termination = true;
  /// Compose the refined depth as D^m + k(o+1)/2 instead of the segment
  /// relative z(X_a) + k(o+1)/2. Kept for comparison only; it can leave the
  /// bracketing segment.
  bool literal_offset_composition = false;

  void validate() const;
};

/// Default sample spacing: hull box diagonal / 256.
inline double default_sample_spacing(const Aabb &hull_box) { return hull_box.diagonal() / 256.0; }

inline constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

struct DepthMap {
  Camera camera;
  ScalarMap depth;  // camera-space z; kBackgroundDepth on background

  DepthMap() = default;
  explicit DepthMap(const Camera &cam) : camera(cam), depth(cam.width, cam.height, kBackgroundDepth) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  bool foreground(int x, int y) const { return std::isfinite(depth(x, y)); }
  Mask mask() const;
  std::size_t foreground_count() const;
};

/// Sample lattice along one pixel ray: depths anchor + j*k for j in
/// [first, last]. All variants of a walk (pruned or not) share the anchor, so
/// they evaluate bit-identical sample positions.
struct SampleWindow {
  double anchor = 0.0;
  long first = 0;
  long last = -1;
};

struct Crossing {
  Vec3 a;
  Vec3 b;
  double depth_a;
  double depth_b;
  double midpoint_depth;  // D^m
};

struct LocalizeResult {
  std::optional<Crossing> crossing;
  std::size_t evaluations = 0;
};

/// Converts a parametric ray interval (ray length) to camera depth.
double depth_along_ray(const Camera &cam, const Ray &ray, double t);

/// Lattice window covering a hull interval, anchored at its near depth.
SampleWindow hull_window(const Camera &cam, const Ray &ray, const RayInterval &interval, const SampleSpec &spec);

/// Walks the window from near to far and returns the first consecutive pair
/// with s_a < threshold <= s_b. With early termination the walk stops at X_b.
LocalizeResult localize_depth(const Camera &cam, const Vec2 &pixel, const SampleWindow &window,
                              const OccupancyField &field, const SampleSpec &spec);

/// D^r from a bracketing pair; falls back to D^m when the offset reports no
/// crossing.
double refine_depth(const Crossing &crossing, const OccupancyField &field, const SampleSpec &spec);

struct RenderOptions {
  /// Restrict sampling to hull intervals. When false every pixel walks the
  /// whole carving volume on the same lattice.
  bool prune = true;
  /// Only render pixels set in this mask (others stay background).
  const Mask *pixels = nullptr;
  unsigned workers = 0;
};

struct DepthRender {
  DepthMap map;
  std::size_t evaluations = 0;  // occupancy evaluations during localization
};

/// Per-pixel localize + refine over the target raster. Throws EmptyHullError
/// for an empty hull.
DepthRender render_depth(const Camera &target, const VoxelHull &hull, const OccupancyField &field,
                         const SampleSpec &spec, const RenderOptions &options = {});

}  // namespace fvv
