#pragma once

#include "fvv/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fvv {

/// Pinhole camera. Pixel centers sit at integer coordinates with (0,0) the
/// top-left pixel center; camera axes are x right, y down, z forward.
/// Depth everywhere in this library is camera-space z, not ray length.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;
  Mat3 rotation = Mat3::Identity();     // world -> camera
  Vec3 translation = Vec3::Zero();      // world -> camera

  /// Builds and validates a camera. Throws ValidationError on bad intrinsics
  /// or a rotation that is not a proper orthonormal matrix.
  static Camera make(double fx, double fy, double cx, double cy, int width,
                     int height, const Mat3 &rotation, const Vec3 &translation);

  /// Camera at `position` looking at `target`; world up is +y.
  static Camera look_at(const Vec3 &position, const Vec3 &target, double fx,
                        double fy, int width, int height);

  void validate() const;

  Vec3 position() const { return -rotation.transpose() * translation; }
  Vec3 forward() const { return rotation.row(2).transpose(); }
  Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
  Vec3 to_world(const Vec3 &cam) const { return rotation.transpose() * (cam - translation); }

  /// Same pose, intrinsics rescaled to a new raster size.
  Camera resized(int new_width, int new_height) const;

  /// Pixel lies within the image footprint [-0.5, w-0.5] x [-0.5, h-0.5].
  bool contains(const Vec2 &pixel) const {
    return pixel.x() >= -0.5 && pixel.y() >= -0.5 && pixel.x() <= width - 0.5 &&
           pixel.y() <= height - 0.5;
  }

  bool operator==(const Camera &) const = default;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Projection {
  Vec2 pixel;
  double depth;
};

inline constexpr double kBehindCameraEpsilon = 1e-9;

/// Throws BehindCameraError when the point is at or behind the image plane.
Projection project(const Camera &cam, const Vec3 &point);

/// Non-throwing projection; false when the point is behind the camera.
bool try_project(const Camera &cam, const Vec3 &point, Projection &out);

/// Throws InvalidDepthError for depth <= 0.
Vec3 unproject(const Camera &cam, const Vec2 &pixel, double depth);

/// Camera-space direction with z = 1 for the given pixel.
inline Vec3 pixel_direction(const Camera &cam, const Vec2 &pixel) {
  return {(pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0};
}

/// Throws BoundsError for pixels outside the image footprint.
Ray pixel_ray(const Camera &cam, const Vec2 &pixel);

struct CameraRig {
  std::vector<Camera> cameras;
  Vec3 center = Vec3::Zero();

  /// Checks the rig invariants: at least two cameras, all facing the center.
  void validate() const;

  std::size_t size() const { return cameras.size(); }

  /// Rig restricted to the given camera indices, in the given order.
  CameraRig subset(const std::vector<std::size_t> &indices) const;

  bool operator==(const CameraRig &) const = default;
};

/// n cameras evenly spaced on a horizontal ring (y = center.y + height)
/// looking at `center`. Camera i sits at azimuth 2*pi*i/n measured from +x
/// toward +z.
CameraRig make_rig(int n, double radius, double height, const Vec3 &center,
                   int resolution, double focal);

/// Camera on a sphere around `center`: yaw is azimuth from +x toward +z,
/// pitch is elevation toward +y, both in degrees.
Camera orbit_camera(const Vec3 &center, double yaw_deg, double pitch_deg,
                    double dist, int resolution, double focal);

std::string rig_to_json(const CameraRig &rig);
CameraRig rig_from_json(const std::string &text);
CameraRig load_rig(const std::filesystem::path &path);
void save_rig(const CameraRig &rig, const std::filesystem::path &path);

}  // namespace fvv
