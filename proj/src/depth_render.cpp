#include "fvv/depth_render.hpp"

#include <algorithm>
#include <numeric>

namespace fvv {

void SampleSpec::validate() const {
  if (!(spacing > 0.0)) throw ConfigError("sample spacing k must be positive");
  if (max_samples < 2) throw ConfigError("max_samples must be at least 2");
}

Mask DepthMap::mask() const {
  Mask m(width(), height(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) m[i] = std::isfinite(depth[i]) ? 1 : 0;
  return m;
}

std::size_t DepthMap::foreground_count() const {
  return static_cast<std::size_t>(
      std::count_if(depth.data().begin(), depth.data().end(), [](double d) { return std::isfinite(d); }));
}

double depth_along_ray(const Camera &cam, const Ray &ray, double t) { return t * ray.direction.dot(cam.forward()); }

SampleWindow hull_window(const Camera &cam, const Ray &ray, const RayInterval &interval, const SampleSpec &spec) {
  const double z_near = depth_along_ray(cam, ray, interval.t_near);
  const double z_far = depth_along_ray(cam, ray, interval.t_far);
  SampleWindow w;
  w.anchor = z_near;
  w.first = 0;
  w.last = std::min<long>(spec.max_samples - 1, static_cast<long>(std::ceil((z_far - z_near) / spec.spacing)));
  return w;
}

LocalizeResult localize_depth(const Camera &cam, const Vec2 &pixel, const SampleWindow &window,
                              const OccupancyField &field, const SampleSpec &spec) {
  LocalizeResult result;
  const Vec3 dir = pixel_direction(cam, pixel);
  bool have_prev = false;
  double prev_s = 0.0, prev_z = 0.0;
  Vec3 prev_x;
  for (long j = window.first; j <= window.last; ++j) {
    const double z = window.anchor + static_cast<double>(j) * spec.spacing;
    if (!(z > 0.0)) continue;  // samples behind the camera plane do not exist
    const Vec3 x = cam.to_world(dir * z);
    const double s = field.occupancy(x, z);
    ++result.evaluations;
    if (!result.crossing && have_prev && prev_s < spec.occupancy_threshold && s >= spec.occupancy_threshold) {
      result.crossing = Crossing{prev_x, x, prev_z, z, 0.5 * (prev_z + z)};
      if (spec.early_termination) break;
    }
    have_prev = true;
    prev_s = s;
    prev_z = z;
    prev_x = x;
  }
  return result;
}

double refine_depth(const Crossing &crossing, const OccupancyField &field, const SampleSpec &spec) {
  double o;
  try {
    o = field.offset(crossing.a, crossing.b);
  } catch (const NoCrossingError &) {
    return crossing.midpoint_depth;
  }
  const double base = spec.literal_offset_composition ? crossing.midpoint_depth : crossing.depth_a;
  return base + spec.spacing * (o + 1.0) * 0.5;
}

DepthRender render_depth(const Camera &target, const VoxelHull &hull, const OccupancyField &field,
                         const SampleSpec &spec, const RenderOptions &options) {
  spec.validate();
  hull.validate();
  if (hull.empty()) throw EmptyHullError("cannot render depth from an empty hull");
  if (options.pixels && !options.pixels->same_shape(target.width, target.height))
    throw ConfigError("render pixel mask does not match the target resolution");

  DepthRender out;
  out.map = DepthMap(target);
  const Aabb volume = hull.grid_box();
  std::vector<std::size_t> row_evaluations(static_cast<std::size_t>(target.height), 0);

  parallel_for(static_cast<std::size_t>(target.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < target.width; ++x) {
        if (options.pixels && !(*options.pixels)(x, y)) continue;
        const Vec2 pixel(x, y);
        const Ray ray = pixel_ray(target, pixel);
        const auto interval = ray_hull_interval(hull, ray);

        SampleWindow window;
        if (options.prune) {
          if (!interval) continue;
          window = hull_window(target, ray, *interval, spec);
        } else {
          double t0, t1;
          if (!intersect_aabb(volume, ray.origin, ray.direction, t0, t1) || t1 < 0.0) continue;
          const double z0 = depth_along_ray(target, ray, std::max(0.0, t0));
          const double z1 = depth_along_ray(target, ray, t1);
          window.anchor = interval ? hull_window(target, ray, *interval, spec).anchor : z0;
          window.first = -static_cast<long>(std::floor((window.anchor - z0) / spec.spacing));
          window.last = std::min<long>(spec.max_samples - 1,
                                       static_cast<long>(std::ceil((z1 - window.anchor) / spec.spacing)));
        }

        const auto found = localize_depth(target, pixel, window, field, spec);
        row_evaluations[yy] += found.evaluations;
        if (found.crossing) out.map.depth(x, y) = refine_depth(*found.crossing, field, spec);
      }
    }
  }, options.workers);

  out.evaluations = std::accumulate(row_evaluations.begin(), row_evaluations.end(), std::size_t{0});
  return out;
}

}  // namespace fvv
