#include "fvv/hull.hpp"

#include <algorithm>
#include <numeric>

namespace fvv {

namespace {

// Margin, in pixels, between a continuous projection and the nearest sampled
// mask pixel center that may still belong to the silhouette.
constexpr double kMaskSampleMargin = 1.5;

constexpr double kFar = 1e20;

// Exact squared Euclidean distance transform (Felzenszwalb & Huttenlocher)
// of a sampled 1D function; used separably along columns then rows.
void edt_1d(const std::vector<double> &f, std::vector<double> &d, std::vector<int> &v, std::vector<double> &z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = std::min(kFar, diff * diff + f[v[k]]);
  }
}

// Distance from every pixel center to the nearest foreground pixel center.
ScalarMap distance_to_foreground(const Mask &mask) {
  const int w = mask.width();
  const int h = mask.height();
  ScalarMap sq(w, h, kFar);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) sq[i] = 0.0;

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < w; ++x) {
    f.resize(h);
    d.resize(h);
    for (int y = 0; y < h; ++y) f[y] = sq(x, y);
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq(x, y) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.resize(w);
    d.resize(w);
    for (int x = 0; x < w; ++x) f[x] = sq(x, y);
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq(x, y) = d[x];
  }
  for (auto &value : sq.data()) value = std::sqrt(value);
  return sq;
}

}  // namespace

void VoxelHull::validate() const {
  if (!(spacing > 0.0)) throw ValidationError("hull spacing must be positive");
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw ValidationError("hull dims must be >= 1");
  if (occupancy.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])
    throw ValidationError("hull occupancy size does not match dims");
}

std::size_t VoxelHull::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(occupancy.begin(), occupancy.end(), [](auto v) { return v != 0; }));
}

VoxelHull carve(const CameraRig &rig, const std::vector<Mask> &masks, const Aabb &bounds, double spacing,
                CarveTest test, unsigned workers) {
  if (masks.size() != rig.size()) throw ConfigError("carve needs exactly one mask per camera");
  if (bounds.degenerate()) throw ConfigError("carve bounds are degenerate");
  if (!(spacing > 0.0)) throw ConfigError("carve spacing must be positive");
  for (std::size_t c = 0; c < masks.size(); ++c)
    if (!masks[c].same_shape(rig.cameras[c].width, rig.cameras[c].height))
      throw ConfigError("mask " + std::to_string(c) + " does not match its camera resolution");

  VoxelHull hull;
  hull.origin = bounds.lo;
  hull.spacing = spacing;
  for (int a = 0; a < 3; ++a) hull.dims[a] = std::max(1, static_cast<int>(std::ceil(bounds.extent()[a] / spacing - 1e-9)));
  hull.occupancy.assign(static_cast<std::size_t>(hull.dims[0]) * hull.dims[1] * hull.dims[2], 1);

  std::vector<ScalarMap> distance;
  if (test == CarveTest::Conservative)
    for (const auto &m : masks) distance.push_back(distance_to_foreground(m));

  const double half_diagonal = 0.5 * std::sqrt(3.0) * spacing;
  parallel_for(static_cast<std::size_t>(hull.dims[2]), [&](std::size_t k0, std::size_t k1) {
    for (int k = static_cast<int>(k0); k < static_cast<int>(k1); ++k) {
      for (int j = 0; j < hull.dims[1]; ++j) {
        for (int i = 0; i < hull.dims[0]; ++i) {
          const Vec3 center = hull.voxel_center(i, j, k);
          bool keep = true;
          for (std::size_t c = 0; c < masks.size() && keep; ++c) {
            const Camera &cam = rig.cameras[c];
            Projection proj;
            if (!try_project(cam, center, proj) || !cam.contains(proj.pixel)) continue;
            const int px = std::clamp(static_cast<int>(std::lround(proj.pixel.x())), 0, cam.width - 1);
            const int py = std::clamp(static_cast<int>(std::lround(proj.pixel.y())), 0, cam.height - 1);
            if (test == CarveTest::Center) {
              keep = masks[c](px, py) != 0;
            } else {
              // A voxel whose bounding sphere reaches the camera plane cannot be
              // bounded in the image; leave it to the other views.
              if (proj.depth <= half_diagonal) continue;
              const double radius_px = std::max(cam.fx, cam.fy) * half_diagonal / (proj.depth - half_diagonal);
              keep = distance[c](px, py) <= radius_px + kMaskSampleMargin;
            }
          }
          hull.occupancy[hull.index(i, j, k)] = keep ? 1 : 0;
        }
      }
    }
  }, workers);
  return hull;
}

std::optional<RayInterval> ray_hull_interval(const VoxelHull &hull, const Ray &ray) {
  const Aabb grid = hull.grid_box();
  double t_enter, t_exit;
  if (!intersect_aabb(grid, ray.origin, ray.direction, t_enter, t_exit) || t_exit < 0.0) return std::nullopt;
  const double t_start = std::max(0.0, t_enter);

  const Vec3 start = ray.at(t_start);
  int cell[3], step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    const double rel = (start[a] - hull.origin[a]) / hull.spacing;
    cell[a] = std::clamp(static_cast<int>(std::floor(rel)), 0, hull.dims[a] - 1);
    const double d = ray.direction[a];
    if (d > 0.0) {
      step[a] = 1;
      t_max[a] = (hull.origin[a] + (cell[a] + 1) * hull.spacing - ray.origin[a]) / d;
      t_delta[a] = hull.spacing / d;
    } else if (d < 0.0) {
      step[a] = -1;
      t_max[a] = (hull.origin[a] + cell[a] * hull.spacing - ray.origin[a]) / d;
      t_delta[a] = -hull.spacing / d;
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  double near = std::numeric_limits<double>::infinity();
  double far = -std::numeric_limits<double>::infinity();
  while (true) {
    if (hull.occupied(cell[0], cell[1], cell[2])) {
      double a, b;
      if (intersect_aabb(hull.voxel_box(cell[0], cell[1], cell[2]), ray.origin, ray.direction, a, b) && b >= 0.0) {
        near = std::min(near, std::max(0.0, a));
        far = std::max(far, b);
      }
    }
    const int axis = t_max[0] < t_max[1] ? (t_max[0] < t_max[2] ? 0 : 2) : (t_max[1] < t_max[2] ? 1 : 2);
    if (t_max[axis] > t_exit) break;
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= hull.dims[axis]) break;
    t_max[axis] += t_delta[axis];
  }
  if (!(near <= far)) return std::nullopt;
  return RayInterval{near, far};
}

Aabb hull_aabb(const VoxelHull &hull) {
  int lo[3] = {hull.dims[0], hull.dims[1], hull.dims[2]};
  int hi[3] = {-1, -1, -1};
  for (int k = 0; k < hull.dims[2]; ++k)
    for (int j = 0; j < hull.dims[1]; ++j)
      for (int i = 0; i < hull.dims[0]; ++i) {
        if (!hull.occupied(i, j, k)) continue;
        const int c[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], c[a]);
          hi[a] = std::max(hi[a], c[a]);
        }
      }
  if (hi[0] < 0) throw EmptyHullError("hull has no occupied voxels");
  Aabb box;
  for (int a = 0; a < 3; ++a) {
    box.lo[a] = hull.origin[a] + (lo[a] - 1) * hull.spacing;
    box.hi[a] = hull.origin[a] + (hi[a] + 2) * hull.spacing;
  }
  return box;
}

}  // namespace fvv
