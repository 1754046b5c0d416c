#include "fvv/camera.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace fvv {

namespace {

constexpr double kRotationTolerance = 1e-6;

using nlohmann::json;

}  // namespace

Camera Camera::make(double fx, double fy, double cx, double cy, int width,
                    int height, const Mat3 &rotation, const Vec3 &translation) {
  Camera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.rotation = rotation;
  cam.translation = translation;
  cam.validate();
  return cam;
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw ValidationError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw ValidationError("camera resolution must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    throw ValidationError("camera principal point must lie inside the image");
  if (!rotation.allFinite() || !translation.allFinite())
    throw ValidationError("camera pose must be finite");
  const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kRotationTolerance)
    throw ValidationError("camera rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > kRotationTolerance)
    throw ValidationError("camera rotation must have determinant +1");
}

Camera Camera::look_at(const Vec3 &position, const Vec3 &target, double fx,
                       double fy, int width, int height) {
  const Vec3 forward = (target - position).normalized();
  Vec3 up = Vec3::UnitY();
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9) up = Vec3::UnitZ();
  const Vec3 down = (-up + up.dot(forward) * forward).normalized();
  const Vec3 right = down.cross(forward);

  Mat3 rotation;
  rotation.row(0) = right.transpose();
  rotation.row(1) = down.transpose();
  rotation.row(2) = forward.transpose();
  return make(fx, fy, 0.5 * (width - 1), 0.5 * (height - 1), width, height,
              rotation, -rotation * position);
}

Camera Camera::resized(int new_width, int new_height) const {
  Camera out = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  out.width = new_width;
  out.height = new_height;
  out.fx = fx * sx;
  out.fy = fy * sy;
  // Pixel centers are at integers, so the image edge is at -0.5.
  out.cx = (cx + 0.5) * sx - 0.5;
  out.cy = (cy + 0.5) * sy - 0.5;
  return out;
}

bool try_project(const Camera &cam, const Vec3 &point, Projection &out) {
  const Vec3 p = cam.to_camera(point);
  if (!(p.z() > kBehindCameraEpsilon)) return false;
  out.pixel = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
  out.depth = p.z();
  return true;
}

Projection project(const Camera &cam, const Vec3 &point) {
  Projection out;
  if (!try_project(cam, point, out))
    throw BehindCameraError("point is at or behind the camera plane");
  return out;
}

Vec3 unproject(const Camera &cam, const Vec2 &pixel, double depth) {
  if (!(depth > 0.0)) throw InvalidDepthError("unproject requires depth > 0");
  return cam.to_world(pixel_direction(cam, pixel) * depth);
}

Ray pixel_ray(const Camera &cam, const Vec2 &pixel) {
  if (!cam.contains(pixel)) throw BoundsError("pixel outside image bounds");
  Ray ray;
  ray.origin = cam.position();
  ray.direction = (cam.rotation.transpose() * pixel_direction(cam, pixel)).normalized();
  return ray;
}

void CameraRig::validate() const {
  if (cameras.size() < 2) throw ValidationError("rig needs at least two cameras");
  for (const auto &cam : cameras) {
    cam.validate();
    if (!(cam.forward().dot(center - cam.position()) > 0.0))
      throw ValidationError("rig camera does not face the rig center");
  }
}

CameraRig CameraRig::subset(const std::vector<std::size_t> &indices) const {
  CameraRig out;
  out.center = center;
  for (auto i : indices) {
    if (i >= cameras.size()) throw ConfigError("rig subset index out of range");
    out.cameras.push_back(cameras[i]);
  }
  return out;
}

CameraRig make_rig(int n, double radius, double height, const Vec3 &center,
                   int resolution, double focal) {
  if (n < 2) throw ConfigError("make_rig needs n >= 2 cameras");
  if (!(radius > 0.0)) throw ConfigError("make_rig needs radius > 0");
  if (resolution < 1 || !(focal > 0.0)) throw ConfigError("make_rig needs positive resolution and focal");
  CameraRig rig;
  rig.center = center;
  for (int i = 0; i < n; ++i) {
    const double angle = 2.0 * kPi * i / n;
    const Vec3 position = center + Vec3(radius * std::cos(angle), height, radius * std::sin(angle));
    rig.cameras.push_back(Camera::look_at(position, center, focal, focal, resolution, resolution));
  }
  return rig;
}

Camera orbit_camera(const Vec3 &center, double yaw_deg, double pitch_deg,
                    double dist, int resolution, double focal) {
  if (!(dist > 0.0)) throw ConfigError("orbit distance must be positive");
  const double yaw = radians(yaw_deg);
  const double pitch = radians(pitch_deg);
  const Vec3 offset(std::cos(pitch) * std::cos(yaw), std::sin(pitch), std::cos(pitch) * std::sin(yaw));
  return Camera::look_at(center + dist * offset, center, focal, focal, resolution, resolution);
}

// ---------------------------------------------------------------------------
// Rig JSON

namespace {

json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
T field(const json &obj, const char *key, const std::string &context) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(context + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ParseError(context + ": field \"" + key + "\" has the wrong type");
  }
}

std::vector<double> numbers(const json &obj, const char *key, std::size_t count,
                            const std::string &context) {
  auto values = field<std::vector<double>>(obj, key, context);
  if (values.size() != count)
    throw ParseError(context + ": field \"" + key + "\" needs " + std::to_string(count) + " numbers");
  return values;
}

}  // namespace

std::string rig_to_json(const CameraRig &rig) {
  json doc;
  doc["center"] = vec_json(rig.center);
  doc["cameras"] = json::array();
  for (const auto &cam : rig.cameras) {
    json c;
    c["fx"] = cam.fx;
    c["fy"] = cam.fy;
    c["cx"] = cam.cx;
    c["cy"] = cam.cy;
    c["width"] = cam.width;
    c["height"] = cam.height;
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) rot.push_back(cam.rotation(r, col));
    c["rotation"] = rot;
    c["translation"] = vec_json(cam.translation);
    doc["cameras"].push_back(c);
  }
  // nlohmann serializes doubles with round-trip precision.
  return doc.dump(2) + "\n";
}

CameraRig rig_from_json(const std::string &text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("rig: malformed JSON: ") + e.what());
  }
  CameraRig rig;
  const auto center = numbers(doc, "center", 3, "rig");
  rig.center = {center[0], center[1], center[2]};
  if (!doc.contains("cameras")) throw ParseError("rig: missing field \"cameras\"");
  if (!doc["cameras"].is_array()) throw ParseError("rig: field \"cameras\" must be an array");
  std::size_t index = 0;
  for (const auto &c : doc["cameras"]) {
    const std::string ctx = "rig: cameras[" + std::to_string(index++) + "]";
    const auto rot = numbers(c, "rotation", 9, ctx);
    const auto trans = numbers(c, "translation", 3, ctx);
    Mat3 rotation;
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) rotation(r, col) = rot[r * 3 + col];
    try {
      rig.cameras.push_back(Camera::make(field<double>(c, "fx", ctx), field<double>(c, "fy", ctx),
                                         field<double>(c, "cx", ctx), field<double>(c, "cy", ctx),
                                         field<int>(c, "width", ctx), field<int>(c, "height", ctx),
                                         rotation, {trans[0], trans[1], trans[2]}));
    } catch (const ValidationError &e) {
      throw ValidationError(ctx + ": " + e.what());
    }
  }
  rig.validate();
  return rig;
}

CameraRig load_rig(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open rig file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return rig_from_json(buffer.str());
}

void save_rig(const CameraRig &rig, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write rig file " + path.string());
  out << rig_to_json(rig);
}

}  // namespace fvv
