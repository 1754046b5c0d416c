#pragma once

#include "fvv/camera.hpp"
#include "fvv/raster.hpp"
#include "fvv/scene.hpp"

#include <array>
#include <optional>
#include <vector>

namespace fvv {

/// Binary occupancy grid; voxel (i,j,k) spans origin + [i,i+1)*spacing etc.
struct VoxelHull {
  Vec3 origin = Vec3::Zero();
  double spacing = 1.0;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<std::uint8_t> occupancy;

  void validate() const;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  bool occupied(int i, int j, int k) const { return occupancy[index(i, j, k)] != 0; }
  Vec3 voxel_center(int i, int j, int k) const {
    return origin + spacing * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  Aabb voxel_box(int i, int j, int k) const {
    const Vec3 lo = origin + spacing * Vec3(i, j, k);
    return {lo, lo + Vec3::Constant(spacing)};
  }
  Aabb grid_box() const {
    return {origin, origin + spacing * Vec3(dims[0], dims[1], dims[2])};
  }
  std::size_t occupied_count() const;
  bool empty() const { return occupied_count() == 0; }
};

enum class CarveTest {
  /// Keep a voxel when its projected bounding disk touches the silhouette.
  Conservative,
  /// Keep a voxel when its center projects onto a foreground pixel.
  Center,
};

/// Shape-from-silhouette carving. Voxels that fall behind a camera or project
/// outside its image are never carved by that camera.
VoxelHull carve(const CameraRig &rig, const std::vector<Mask> &masks, const Aabb &bounds, double spacing,
                CarveTest test = CarveTest::Conservative, unsigned workers = 0);

/// Default grid spacing for a carving volume: diagonal / 128.
inline double default_carve_spacing(const Aabb &bounds) { return bounds.diagonal() / 128.0; }

struct RayInterval {
  double t_near;
  double t_far;
};

/// Parametric span of all occupied voxels the ray traverses, clamped to
/// t >= 0; nullopt when the ray meets no occupied voxel.
std::optional<RayInterval> ray_hull_interval(const VoxelHull &hull, const Ray &ray);

/// Tight box over occupied voxels, padded by one voxel on every face.
/// Throws EmptyHullError on an empty hull.
Aabb hull_aabb(const VoxelHull &hull);

}  // namespace fvv
