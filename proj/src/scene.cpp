#include "fvv/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace fvv {

using nlohmann::json;

bool intersect_aabb(const Aabb &box, const Vec3 &origin, const Vec3 &direction, double &t_near, double &t_far) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return false;
      continue;
    }
    const double inv = 1.0 / direction[a];
    double t0 = (box.lo[a] - origin[a]) * inv;
    double t1 = (box.hi[a] - origin[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo > hi) return false;
  t_near = lo;
  t_far = hi;
  return true;
}

Color Albedo::at(const Vec3 &p) const {
  switch (kind) {
    case Kind::Solid:
      return color_a;
    case Kind::Checker: {
      const long parity = static_cast<long>(std::floor(frequency * p.x())) +
                          static_cast<long>(std::floor(frequency * p.y())) +
                          static_cast<long>(std::floor(frequency * p.z()));
      return (parity & 1) ? color_b : color_a;
    }
    case Kind::Stripes:
      return (static_cast<long>(std::floor(frequency * p[axis])) & 1) ? color_b : color_a;
  }
  return color_a;
}

double Primitive::sdf(const Vec3 &p) const {
  switch (shape) {
    case Shape::Sphere:
      return (p - center).norm() - radius;
    case Shape::Capsule: {
      const Vec3 ab = end_b - end_a;
      const double len2 = ab.squaredNorm();
      const double h = len2 > 0.0 ? std::clamp((p - end_a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      return (p - end_a - h * ab).norm() - radius;
    }
    case Shape::Box: {
      const Vec3 q = (p - center).cwiseAbs() - half_extents;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
  }
  return std::numeric_limits<double>::infinity();
}

Aabb Primitive::bounds() const {
  switch (shape) {
    case Shape::Sphere:
      return {center.array() - radius, center.array() + radius};
    case Shape::Capsule:
      return {end_a.cwiseMin(end_b).array() - radius, end_a.cwiseMax(end_b).array() + radius};
    case Shape::Box:
      return {center - half_extents, center + half_extents};
  }
  return {};
}

void AnalyticScene::validate() const {
  if (primitives.empty()) throw ValidationError("scene needs at least one primitive");
  for (const auto &p : primitives) {
    if (p.shape != Primitive::Shape::Box && !(p.radius > 0.0))
      throw ValidationError("scene primitive radius must be positive");
    if (p.shape == Primitive::Shape::Box && !(p.half_extents.array() > 0.0).all())
      throw ValidationError("scene box half extents must be positive");
  }
}

Aabb AnalyticScene::bounds() const {
  if (primitives.empty()) return {};
  Aabb box = primitives.front().bounds();
  for (const auto &p : primitives) {
    const Aabb b = p.bounds();
    box.lo = box.lo.cwiseMin(b.lo);
    box.hi = box.hi.cwiseMax(b.hi);
  }
  return box;
}

double AnalyticScene::sdf(const Vec3 &p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto &prim : primitives) d = std::min(d, prim.sdf(p));
  return d;
}

double scene_sdf(const AnalyticScene &scene, const Vec3 &p) { return scene.sdf(p); }

std::size_t AnalyticScene::closest_primitive(const Vec3 &p) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const double d = primitives[i].sdf(p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vec3 AnalyticScene::normal(const Vec3 &p) const {
  const Primitive &prim = primitives[closest_primitive(p)];
  if (prim.shape == Primitive::Shape::Sphere) return (p - prim.center).normalized();
  constexpr double h = 1e-5;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    g[a] = prim.sdf(p + e) - prim.sdf(p - e);
  }
  return g.normalized();
}

Color AnalyticScene::shade(const Vec3 &p) const {
  const Primitive &prim = primitives[closest_primitive(p)];
  const double lambert = std::max(0.0, normal(p).dot(light_direction));
  return prim.albedo.at(p) * static_cast<float>(ambient + (1.0 - ambient) * lambert);
}

// ---------------------------------------------------------------------------
// Fixtures

AnalyticScene sphere_checker_scene() {
  AnalyticScene scene;
  Primitive sphere;
  sphere.shape = Primitive::Shape::Sphere;
  sphere.center = Vec3::Zero();
  sphere.radius = 1.0;
  sphere.albedo.kind = Albedo::Kind::Checker;
  sphere.albedo.frequency = 8.0;
  sphere.albedo.color_a = Color(0.9f, 0.85f, 0.75f);
  sphere.albedo.color_b = Color(0.15f, 0.25f, 0.45f);
  scene.primitives.push_back(sphere);
  return scene;
}

AnalyticScene two_sphere_scene() {
  AnalyticScene scene;
  Primitive near_sphere;
  near_sphere.center = Vec3(0.7, 0.0, 0.0);
  near_sphere.radius = 0.4;
  near_sphere.albedo.kind = Albedo::Kind::Stripes;
  near_sphere.albedo.frequency = 6.0;
  near_sphere.albedo.color_a = Color(0.85f, 0.3f, 0.25f);
  near_sphere.albedo.color_b = Color(0.95f, 0.9f, 0.8f);
  Primitive far_sphere;
  far_sphere.center = Vec3(-0.5, 0.0, 0.2);
  far_sphere.radius = 0.55;
  far_sphere.albedo.kind = Albedo::Kind::Checker;
  far_sphere.albedo.frequency = 8.0;
  far_sphere.albedo.color_a = Color(0.2f, 0.6f, 0.3f);
  far_sphere.albedo.color_b = Color(0.9f, 0.9f, 0.6f);
  scene.primitives = {near_sphere, far_sphere};
  return scene;
}

// ---------------------------------------------------------------------------
// Scene JSON

namespace {

json color_json(const Color &c) { return json::array({c.x(), c.y(), c.z()}); }
json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
T get(const json &obj, const char *key, const std::string &ctx) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(ctx + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception &) {
    throw ParseError(ctx + ": field \"" + key + "\" has the wrong type");
  }
}

Vec3 get_vec(const json &obj, const char *key, const std::string &ctx) {
  const auto v = get<std::vector<double>>(obj, key, ctx);
  if (v.size() != 3) throw ParseError(ctx + ": field \"" + key + "\" needs 3 numbers");
  return {v[0], v[1], v[2]};
}

Color get_color(const json &obj, const char *key, const std::string &ctx, const Color &fallback) {
  if (!obj.contains(key)) return fallback;
  const Vec3 v = get_vec(obj, key, ctx);
  return v.cast<float>();
}

const char *kAxisNames[] = {"x", "y", "z"};

}  // namespace

std::string scene_to_json(const AnalyticScene &scene) {
  json doc;
  doc["light"] = vec_json(scene.light_direction);
  doc["ambient"] = scene.ambient;
  doc["primitives"] = json::array();
  for (const auto &p : scene.primitives) {
    json j;
    switch (p.shape) {
      case Primitive::Shape::Sphere:
        j["shape"] = "sphere";
        j["center"] = vec_json(p.center);
        j["radius"] = p.radius;
        break;
      case Primitive::Shape::Capsule:
        j["shape"] = "capsule";
        j["a"] = vec_json(p.end_a);
        j["b"] = vec_json(p.end_b);
        j["radius"] = p.radius;
        break;
      case Primitive::Shape::Box:
        j["shape"] = "box";
        j["center"] = vec_json(p.center);
        j["half_extents"] = vec_json(p.half_extents);
        break;
    }
    json a;
    switch (p.albedo.kind) {
      case Albedo::Kind::Solid:
        a["kind"] = "solid";
        a["color"] = color_json(p.albedo.color_a);
        break;
      case Albedo::Kind::Checker:
        a["kind"] = "checker";
        a["frequency"] = p.albedo.frequency;
        a["color_a"] = color_json(p.albedo.color_a);
        a["color_b"] = color_json(p.albedo.color_b);
        break;
      case Albedo::Kind::Stripes:
        a["kind"] = "stripes";
        a["axis"] = kAxisNames[p.albedo.axis];
        a["frequency"] = p.albedo.frequency;
        a["color_a"] = color_json(p.albedo.color_a);
        a["color_b"] = color_json(p.albedo.color_b);
        break;
    }
    j["albedo"] = a;
    doc["primitives"].push_back(j);
  }
  return doc.dump(2) + "\n";
}

AnalyticScene scene_from_json(const std::string &text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("scene: malformed JSON: ") + e.what());
  }
  AnalyticScene scene;
  if (doc.contains("light")) scene.light_direction = get_vec(doc, "light", "scene").normalized();
  if (doc.contains("ambient")) scene.ambient = get<double>(doc, "ambient", "scene");
  if (!doc.contains("primitives")) throw ParseError("scene: missing field \"primitives\"");
  if (!doc["primitives"].is_array()) throw ParseError("scene: field \"primitives\" must be an array");
  std::size_t index = 0;
  for (const auto &j : doc["primitives"]) {
    const std::string ctx = "scene: primitives[" + std::to_string(index++) + "]";
    Primitive p;
    const auto shape = get<std::string>(j, "shape", ctx);
    if (shape == "sphere") {
      p.shape = Primitive::Shape::Sphere;
      p.center = get_vec(j, "center", ctx);
      p.radius = get<double>(j, "radius", ctx);
    } else if (shape == "capsule") {
      p.shape = Primitive::Shape::Capsule;
      p.end_a = get_vec(j, "a", ctx);
      p.end_b = get_vec(j, "b", ctx);
      p.radius = get<double>(j, "radius", ctx);
    } else if (shape == "box") {
      p.shape = Primitive::Shape::Box;
      p.center = get_vec(j, "center", ctx);
      p.half_extents = get_vec(j, "half_extents", ctx);
    } else {
      throw ParseError(ctx + ": unknown shape \"" + shape + "\"");
    }
    if (j.contains("albedo")) {
      const json &a = j["albedo"];
      const auto kind = get<std::string>(a, "kind", ctx + ".albedo");
      if (kind == "solid") {
        p.albedo.kind = Albedo::Kind::Solid;
        p.albedo.color_a = get_color(a, "color", ctx, p.albedo.color_a);
      } else if (kind == "checker" || kind == "stripes") {
        p.albedo.kind = kind == "checker" ? Albedo::Kind::Checker : Albedo::Kind::Stripes;
        if (a.contains("frequency")) p.albedo.frequency = get<double>(a, "frequency", ctx);
        p.albedo.color_a = get_color(a, "color_a", ctx, p.albedo.color_a);
        p.albedo.color_b = get_color(a, "color_b", ctx, p.albedo.color_b);
        if (kind == "stripes" && a.contains("axis")) {
          const auto axis = get<std::string>(a, "axis", ctx);
          const auto it = std::find(std::begin(kAxisNames), std::end(kAxisNames), axis);
          if (it == std::end(kAxisNames)) throw ParseError(ctx + ": stripes axis must be x, y or z");
          p.albedo.axis = static_cast<int>(it - std::begin(kAxisNames));
        }
      } else {
        throw ParseError(ctx + ": unknown albedo kind \"" + kind + "\"");
      }
    }
    scene.primitives.push_back(p);
  }
  try {
    scene.validate();
  } catch (const ValidationError &e) {
    throw ParseError(std::string("scene: ") + e.what());
  }
  return scene;
}

AnalyticScene load_scene(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scene file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return scene_from_json(buffer.str());
}

void save_scene(const AnalyticScene &scene, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write scene file " + path.string());
  out << scene_to_json(scene);
}

// ---------------------------------------------------------------------------
// Ground truth rendering

namespace {

double intersect_sphere(const Primitive &s, const Ray &ray) {
  const Vec3 oc = ray.origin - s.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double root = std::sqrt(disc);
  // Stable pair of roots; q has the sign of -b.
  const double q = b > 0.0 ? -b - root : -b + root;
  double t0 = q;
  double t1 = q != 0.0 ? c / q : 0.0;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return std::numeric_limits<double>::infinity();
}

// Near-tangent rays stop up to epsilon / cos(incidence) short of the surface.
// Bracket the sign change just past the stopping point and bisect it.
double settle_on_surface(const Primitive &prim, const Ray &ray, double t, double epsilon) {
  if (prim.sdf(ray.at(t)) <= 0.0) return t;
  double step = epsilon;
  for (int i = 0; i < 40 && prim.sdf(ray.at(t + step)) > 0.0; ++i) step *= 2.0;
  if (prim.sdf(ray.at(t + step)) > 0.0 || step > 1e4 * epsilon) return t;
  double lo = t, hi = t + step;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (prim.sdf(ray.at(mid)) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sphere_trace(const Primitive &prim, const Ray &ray, double max_t, double epsilon) {
  double t_near, t_far;
  const Aabb box = prim.bounds();
  const Aabb padded{box.lo.array() - epsilon, box.hi.array() + epsilon};
  if (!intersect_aabb(padded, ray.origin, ray.direction, t_near, t_far)) return std::numeric_limits<double>::infinity();
  double t = std::max(0.0, t_near);
  const double end = std::min(max_t, t_far);
  for (int step = 0; step < 512 && t <= end; ++step) {
    const double d = prim.sdf(ray.at(t));
    if (std::abs(d) < epsilon) return settle_on_surface(prim, ray, t, epsilon);
    t += d;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

double trace_scene(const AnalyticScene &scene, const Ray &ray, double max_t) {
  const double epsilon = 1e-7 * std::max(scene.bounds().diagonal(), 1e-9);
  double best = std::numeric_limits<double>::infinity();
  for (const auto &prim : scene.primitives) {
    const double t = prim.shape == Primitive::Shape::Sphere ? intersect_sphere(prim, ray)
                                                            : sphere_trace(prim, ray, max_t, epsilon);
    best = std::min(best, t);
  }
  return best <= max_t ? best : std::numeric_limits<double>::infinity();
}

GroundTruthRender gt_render(const AnalyticScene &scene, const Camera &cam, unsigned workers) {
  scene.validate();
  GroundTruthRender out;
  const int w = cam.width;
  const int h = cam.height;
  out.rgb = ImageRgb(w, h, Color::Zero());
  out.depth = ScalarMap(w, h, std::numeric_limits<double>::infinity());
  out.normal = Raster<Vec3>(w, h, Vec3::Zero());
  out.mask = Mask(w, h, 0);

  const Vec3 forward = cam.forward();
  const Aabb box = scene.bounds();
  const double max_t = (cam.position() - box.center()).norm() + box.diagonal();

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const Ray ray = pixel_ray(cam, Vec2(x, static_cast<double>(y)));
        const double t = trace_scene(scene, ray, max_t);
        if (!std::isfinite(t)) continue;
        const Vec3 p = ray.at(t);
        const int yi = static_cast<int>(y);
        out.depth(x, yi) = t * ray.direction.dot(forward);
        Vec3 n = cam.rotation * scene.normal(p);
        if (n.dot(cam.to_camera(p)) > 0.0) n = -n;
        out.normal(x, yi) = n;
        out.rgb(x, yi) = scene.shade(p);
        out.mask(x, yi) = 1;
      }
    }
  }, workers);
  return out;
}

std::vector<Mask> gt_masks(const AnalyticScene &scene, const CameraRig &rig, unsigned workers) {
  std::vector<Mask> masks;
  masks.reserve(rig.size());
  for (const auto &cam : rig.cameras) masks.push_back(gt_render(scene, cam, workers).mask);
  return masks;
}

}  // namespace fvv
