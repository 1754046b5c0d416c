#include "fvv/normals.hpp"

#include <Eigen/Dense>

#include <deque>

namespace fvv {

namespace {

// Central-difference normal at (x, y) given per-pixel camera-space points.
// Returns false when the stencil is incomplete or degenerate.
template <typename PointAt>
bool stencil_normal(int x, int y, int w, int h, PointAt &&point, const Mask &fg, Vec3 &normal) {
  if (x <= 0 || y <= 0 || x >= w - 1 || y >= h - 1) return false;
  if (!fg(x, y) || !fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1)) return false;
  const Vec3 tx = point(x + 1, y) - point(x - 1, y);
  const Vec3 ty = point(x, y + 1) - point(x, y - 1);
  const Vec3 c = tx.cross(ty);
  const double len = c.norm();
  if (!(len > 0.0) || !std::isfinite(len)) return false;
  normal = c / len;
  if (normal.dot(point(x, y)) > 0.0) normal = -normal;
  return true;
}

Raster<Vec3> camera_rays(const Camera &cam) {
  Raster<Vec3> rays(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) rays(x, y) = pixel_direction(cam, Vec2(x, y));
  return rays;
}

}  // namespace

NormalMap normal_from_depth(const DepthMap &depth) {
  const int w = depth.width();
  const int h = depth.height();
  NormalMap out(w, h);
  const Mask fg = depth.mask();
  const auto point = [&](int x, int y) { return Vec3(pixel_direction(depth.camera, Vec2(x, y)) * depth.depth(x, y)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Vec3 n;
      if (stencil_normal(x, y, w, h, point, fg, n)) {
        out.normals(x, y) = n;
        out.valid(x, y) = 1;
      }
    }
  return out;
}

NormalMap warp_normals(const Camera &src, const NormalMap &src_normals, const DepthMap &target_depth,
                       unsigned workers) {
  if (!src_normals.normals.same_shape(src.width, src.height))
    throw ConfigError("warp: source normal map does not match its camera");
  const int w = target_depth.width();
  const int h = target_depth.height();
  const Mat3 to_target = target_depth.camera.rotation * src.rotation.transpose();
  NormalMap out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
      for (int x = 0; x < w; ++x) {
        const double d = target_depth.depth(x, y);
        if (!std::isfinite(d)) continue;
        Projection proj;
        if (!try_project(src, unproject(target_depth.camera, Vec2(x, y), d), proj) || !src.contains(proj.pixel))
          continue;
        Vec3 n;
        if (!sample_bilinear_valid(src_normals.normals, proj.pixel,
                                   [&](int sx, int sy) { return src_normals.valid(sx, sy) != 0; }, n))
          continue;
        n = to_target * n;
        const double len = n.norm();
        if (!(len > 1e-12)) continue;
        out.normals(x, y) = n / len;
        out.valid(x, y) = 1;
      }
  }, workers);
  return out;
}

NormalMap blend_normals(const NormalMap &n1, const NormalMap &n2, const BlendWeightMap &weights) {
  if (!n1.normals.same_shape(n2.normals) || !n1.normals.same_shape(weights))
    throw ConfigError("normal blend inputs are not aligned");
  NormalMap out(weights.width(), weights.height());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Vec3 n;
    if (n1.valid[i] && n2.valid[i])
      n = weights[i] * n1.normals[i] + (1.0 - weights[i]) * n2.normals[i];
    else if (n1.valid[i])
      n = n1.normals[i];
    else if (n2.valid[i])
      n = n2.normals[i];
    else
      continue;
    const double len = n.norm();
    if (!(len > 1e-9)) continue;
    out.normals[i] = n / len;
    out.valid[i] = 1;
  }
  return out;
}

double normal_residual(const DepthMap &depth, const NormalMap &target, const Mask *mask) {
  if (!target.normals.same_shape(depth.depth)) throw ConfigError("normal residual inputs are not aligned");
  const NormalMap current = normal_from_depth(depth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < current.valid.size(); ++i) {
    if (!current.valid[i] || !target.valid[i] || (mask && !(*mask)[i])) continue;
    sum += (current.normals[i] - target.normals[i]).squaredNorm();
    ++count;
  }
  if (count == 0) throw UndefinedMetricError("normal residual over an empty support");
  return sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Refinement

namespace {

class NormalObjective {
 public:
  NormalObjective(const DepthMap &depth, const NormalMap &target, double damping)
      : depth_(depth), target_(target), damping_(damping), rays_(camera_rays(depth.camera)), fg_(depth.mask()) {
    const int w = depth.width();
    const int h = depth.height();
    variable_.assign(depth.depth.size(), -1);
    for (std::size_t i = 0; i < depth.depth.size(); ++i)
      if (fg_[i]) {
        variable_[i] = static_cast<long>(pixels_.size());
        pixels_.push_back(i);
      }
    for (int y = 1; y < h - 1; ++y)
      for (int x = 1; x < w - 1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!target.valid[i] || !fg_[i] || !fg_[i - 1] || !fg_[i + 1] || !fg_[i - w] || !fg_[i + w]) continue;
        stencils_.push_back(i);
      }
  }

  std::size_t size() const { return pixels_.size(); }
  bool has_support() const { return !stencils_.empty(); }

  struct Value {
    double data;
    double total;
  };

  // Evaluates the objective at displacement d; fills grad when non-null.
  Value evaluate(const Eigen::VectorXd &d, Eigen::VectorXd *grad) const {
    const int w = depth_.width();
    const auto point = [&](std::size_t i) { return Vec3(rays_[i] * (depth_.depth[i] + d[variable_[i]])); };
    if (grad) grad->setZero(static_cast<Eigen::Index>(pixels_.size()));
    const double inv_count = 1.0 / static_cast<double>(stencils_.size());
    double data = 0.0;
    for (std::size_t i : stencils_) {
      const std::size_t l = i - 1, r = i + 1, u = i - w, dn = i + w;
      const Vec3 tx = point(r) - point(l);
      const Vec3 ty = point(dn) - point(u);
      const Vec3 c = tx.cross(ty);
      const double len = c.norm();
      if (!(len > 0.0)) continue;
      const Vec3 unit = c / len;
      const double sign = unit.dot(point(i)) > 0.0 ? -1.0 : 1.0;
      const Vec3 err = sign * unit - target_.normals[i];
      data += err.squaredNorm();
      if (!grad) continue;
      const Vec3 gc = (2.0 * inv_count * sign / len) * (err - unit * unit.dot(err));
      (*grad)[variable_[r]] += gc.dot(rays_[r].cross(ty));
      (*grad)[variable_[l]] -= gc.dot(rays_[l].cross(ty));
      (*grad)[variable_[dn]] += gc.dot(tx.cross(rays_[dn]));
      (*grad)[variable_[u]] -= gc.dot(tx.cross(rays_[u]));
    }
    data *= inv_count;
    const double inv_vars = 1.0 / static_cast<double>(pixels_.size());
    const double total = data + damping_ * inv_vars * d.squaredNorm();
    if (grad) *grad += (2.0 * damping_ * inv_vars) * d;
    return {data, total};
  }

  DepthMap apply(const Eigen::VectorXd &d) const {
    DepthMap out = depth_;
    for (std::size_t k = 0; k < pixels_.size(); ++k) out.depth[pixels_[k]] += d[static_cast<Eigen::Index>(k)];
    return out;
  }

 private:
  const DepthMap &depth_;
  const NormalMap &target_;
  double damping_;
  Raster<Vec3> rays_;
  Mask fg_;
  std::vector<long> variable_;
  std::vector<std::size_t> pixels_;
  std::vector<std::size_t> stencils_;
};

}  // namespace

NormalRefineResult refine_depth_with_normal(const DepthMap &depth, const NormalMap &target,
                                            const NormalRefineOptions &options) {
  if (!target.normals.same_shape(depth.depth)) throw ConfigError("normal refinement inputs are not aligned");
  NormalRefineResult result;
  result.depth = depth;
  const NormalObjective objective(depth, target, options.damping);
  if (options.iterations <= 0 || !objective.has_support()) return result;

  const auto n = static_cast<Eigen::Index>(objective.size());
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n), next_grad(n), direction(n), candidate(n);
  auto value = objective.evaluate(d, &grad);
  result.residuals.push_back(value.data);

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
  for (int iter = 0; iter < options.iterations; ++iter) {
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (memory.empty()) break;
        memory.clear();
      }
      // Two-loop recursion for the quasi-Newton direction.
      direction = -grad;
      std::vector<double> alpha(memory.size());
      for (std::size_t m = memory.size(); m-- > 0;) {
        const auto &[s, y] = memory[m];
        alpha[m] = s.dot(direction) / y.dot(s);
        direction -= alpha[m] * y;
      }
      if (!memory.empty()) {
        const auto &[s, y] = memory.back();
        direction *= s.dot(y) / y.squaredNorm();
      }
      for (std::size_t m = 0; m < memory.size(); ++m) {
        const auto &[s, y] = memory[m];
        const double beta = y.dot(direction) / y.dot(s);
        direction += (alpha[m] - beta) * s;
      }
      double slope = grad.dot(direction);
      if (!(slope < 0.0)) {
        direction = -grad;
        slope = -grad.squaredNorm();
      }
      if (!(slope < 0.0)) break;

      double step = options.initial_step;
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        candidate = d + step * direction;
        const auto trial = objective.evaluate(candidate, &next_grad);
        if (trial.total <= value.total + 1e-4 * step * slope && trial.total < value.total &&
            trial.data <= value.data) {
          Eigen::VectorXd s = candidate - d;
          Eigen::VectorXd y = next_grad - grad;
          if (s.dot(y) > 1e-16) {
            memory.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
          }
          d = candidate;
          grad = next_grad;
          value = trial;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    ++result.accepted_iterations;
    result.residuals.push_back(value.data);
  }
  result.depth = objective.apply(d);
  return result;
}

}  // namespace fvv
