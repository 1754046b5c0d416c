#include "fvv/blend.hpp"

#include <algorithm>

namespace fvv {

AdjacentViews select_adjacent_views(const CameraRig &rig, const Camera &target) {
  if (rig.size() < 2) throw ConfigError("adjacent view selection needs at least two rig cameras");
  const Vec3 target_dir = (target.position() - rig.center).normalized();
  std::vector<std::pair<double, std::size_t>> angles;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const Vec3 dir = (rig.cameras[i].position() - rig.center).normalized();
    angles.emplace_back(std::atan2(dir.cross(target_dir).norm(), dir.dot(target_dir)), i);
  }
  std::stable_sort(angles.begin(), angles.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
  return {angles[0].second, angles[1].second};
}

namespace {

// Projects the surface point of a foreground target pixel into `src`.
bool project_target_pixel(const Camera &src, const DepthMap &target_depth, int x, int y, Projection &proj) {
  const double d = target_depth.depth(x, y);
  if (!std::isfinite(d)) return false;
  const Vec3 X = unproject(target_depth.camera, Vec2(x, y), d);
  return try_project(src, X, proj) && src.contains(proj.pixel);
}

}  // namespace

WarpedImage warp_image(const Camera &src, const ImageRgb &src_rgb, const DepthMap &target_depth,
                       const Mask *src_mask, unsigned workers) {
  if (!src_rgb.same_shape(src.width, src.height)) throw ConfigError("warp: source image does not match its camera");
  const int w = target_depth.width();
  const int h = target_depth.height();
  WarpedImage out{ImageRgb(w, h, Color::Zero()), Mask(w, h, 0)};
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        Projection proj;
        if (!project_target_pixel(src, target_depth, x, y, proj)) continue;
        Color c;
        if (src_mask) {
          if (!sample_bilinear_valid(src_rgb, proj.pixel, [&](int sx, int sy) { return (*src_mask)(sx, sy) != 0; }, c))
            continue;
        } else {
          c = sample_bilinear(src_rgb, proj.pixel);
        }
        out.rgb(x, y) = c;
        out.valid(x, y) = 1;
      }
    }
  }, workers);
  return out;
}

ValidMap warp_depth(const DepthMap &src_depth, const DepthMap &target_depth, unsigned workers) {
  const int w = target_depth.width();
  const int h = target_depth.height();
  ValidMap out{ScalarMap(w, h, 0.0), Mask(w, h, 0)};
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        Projection proj;
        if (!project_target_pixel(src_depth.camera, target_depth, x, y, proj)) continue;
        double d;
        if (!sample_bilinear_valid(src_depth.depth, proj.pixel,
                                   [&](int sx, int sy) { return src_depth.foreground(sx, sy); }, d))
          continue;
        out.values(x, y) = d;
        out.valid(x, y) = 1;
      }
    }
  }, workers);
  return out;
}

ValidMap reproject_depth(const Camera &src, const DepthMap &target_depth) {
  const int w = target_depth.width();
  const int h = target_depth.height();
  ValidMap out{ScalarMap(w, h, 0.0), Mask(w, h, 0)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Projection proj;
      if (!project_target_pixel(src, target_depth, x, y, proj)) continue;
      out.values(x, y) = proj.depth;
      out.valid(x, y) = 1;
    }
  return out;
}

OcclusionMap occlusion_map(const ValidMap &warped, const ValidMap &reprojected) {
  if (!warped.values.same_shape(reprojected.values)) throw ConfigError("occlusion map inputs are not aligned");
  OcclusionMap out{ScalarMap(warped.values.width(), warped.values.height(), 0.0),
                   Mask(warped.values.width(), warped.values.height(), 0)};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!warped.valid[i] || !reprojected.valid[i]) continue;
    out.values[i] = warped.values[i] - reprojected.values[i];
    out.valid[i] = 1;
  }
  return out;
}

ScalarMap view_alignment(const Camera &src, const DepthMap &target_depth) {
  ScalarMap out(target_depth.width(), target_depth.height(), 0.0);
  const Vec3 target_center = target_depth.camera.position();
  const Vec3 src_center = src.position();
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const double d = target_depth.depth(x, y);
      if (!std::isfinite(d)) continue;
      const Vec3 X = unproject(target_depth.camera, Vec2(x, y), d);
      out(x, y) = (X - target_center).normalized().dot((X - src_center).normalized());
    }
  return out;
}

HeuristicBlendProvider::HeuristicBlendProvider(double beta, double gamma) : beta_(beta), gamma_(gamma) {
  if (!(beta_ > 0.0)) throw ConfigError("blend beta must be positive");
  if (!(gamma_ >= 0.0)) throw ConfigError("blend gamma must be non-negative");
}

BlendWeightMap HeuristicBlendProvider::weights(const BlendInputs &in) const {
  const int w = in.image1.rgb.width();
  const int h = in.image1.rgb.height();
  if (!in.image2.rgb.same_shape(w, h) || !in.occlusion1.values.same_shape(w, h) ||
      !in.occlusion2.values.same_shape(w, h) || !in.alignment1.same_shape(w, h) || !in.alignment2.same_shape(w, h))
    throw ConfigError("blend weight inputs are not aligned");
  BlendWeightMap out(w, h, 0.5);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool ok1 = in.image1.valid[i] && in.occlusion1.valid[i];
    const bool ok2 = in.image2.valid[i] && in.occlusion2.valid[i];
    if (ok1 && ok2) {
      const double score = (std::abs(in.occlusion2.values[i]) - std::abs(in.occlusion1.values[i])) / beta_ +
                           gamma_ * (in.alignment1[i] - in.alignment2[i]);
      out[i] = logistic(score);
    } else if (ok1) {
      out[i] = 1.0;
    } else if (ok2) {
      out[i] = 0.0;
    }
  }
  return out;
}

ImageRgb blend(const BlendWeightMap &weights, const ImageRgb &image1, const ImageRgb &image2) {
  if (!weights.same_shape(image1) || !weights.same_shape(image2)) throw ConfigError("blend inputs are not aligned");
  ImageRgb out(image1.width(), image1.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double wt = weights[i];
    for (int c = 0; c < 3; ++c)
      out[i][c] = static_cast<float>(wt * image1[i][c] + (1.0 - wt) * image2[i][c]);
  }
  return out;
}

namespace {

Vec2 low_res_coordinate(int x, int y, double sx, double sy) { return {(x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5}; }

}  // namespace

BlendWeightMap bilinear_upsample(const BlendWeightMap &weights, int width, int height) {
  BlendWeightMap out(width, height, 0.0);
  const double sx = static_cast<double>(weights.width()) / width;
  const double sy = static_cast<double>(weights.height()) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out(x, y) = std::clamp(sample_bilinear(weights, low_res_coordinate(x, y, sx, sy)), 0.0, 1.0);
  return out;
}

DepthMap bilinear_upsample(const DepthMap &depth, int width, int height) {
  DepthMap out(depth.camera.resized(width, height));
  const double sx = static_cast<double>(depth.width()) / width;
  const double sy = static_cast<double>(depth.height()) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto taps = bilinear_taps(depth.width(), depth.height(), low_res_coordinate(x, y, sx, sy));
      double acc = 0.0;
      bool complete = true;
      for (int c = 0; c < 4 && complete; ++c) {
        const double wt = taps.weight(c);
        if (wt == 0.0) continue;
        const double d = depth.depth(taps.x(c), taps.y(c));
        if (!std::isfinite(d))
          complete = false;
        else
          acc += wt * d;
      }
      if (complete) out.depth(x, y) = acc;
    }
  return out;
}

namespace {

Mask morph(const Mask &mask, int radius, bool grow) {
  if (radius <= 0) return mask;
  const int w = mask.width();
  const int h = mask.height();
  const std::uint8_t fill = grow ? 0 : 1;
  Mask tmp(w, h, fill), out(w, h, fill);
  // Separable square window; pixels outside the image count as background.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = fill;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx;
        const std::uint8_t s = (xx < 0 || xx >= w) ? 0 : mask(xx, y);
        if (grow ? s != 0 : s == 0) {
          v = grow ? 1 : 0;
          break;
        }
      }
      tmp(x, y) = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = fill;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        const std::uint8_t s = (yy < 0 || yy >= h) ? 0 : tmp(x, yy);
        if (grow ? s != 0 : s == 0) {
          v = grow ? 1 : 0;
          break;
        }
      }
      out(x, y) = v;
    }
  return out;
}

}  // namespace

Mask dilate(const Mask &mask, int radius) { return morph(mask, radius, true); }
Mask erode(const Mask &mask, int radius) { return morph(mask, radius, false); }

Mask boundary_band(const Mask &low_mask, int radius, int width, int height) {
  Mask band(width, height, 0);
  if (radius <= 0) return band;
  const Mask grown = dilate(low_mask, radius);
  const Mask shrunk = erode(low_mask, radius);
  const double sx = static_cast<double>(low_mask.width()) / width;
  const double sy = static_cast<double>(low_mask.height()) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int lx = std::min(low_mask.width() - 1, static_cast<int>((x + 0.5) * sx));
      const int ly = std::min(low_mask.height() - 1, static_cast<int>((y + 0.5) * sy));
      band(x, y) = (grown(lx, ly) && !shrunk(lx, ly)) ? 1 : 0;
    }
  return dilate(band, radius);
}

BoundaryUpsample upsample_boundary_aware(const DepthMap &low, const VoxelHull &hull, const OccupancyField &field,
                                         const SampleSpec &spec, int width, int height, int radius,
                                         unsigned workers) {
  if (width < low.width() || height < low.height()) throw ConfigError("upsampling target is smaller than the input");
  if (hull.empty()) throw EmptyHullError("cannot re-render the boundary band from an empty hull");
  BoundaryUpsample out;
  out.bilinear = bilinear_upsample(low, width, height);
  out.band = boundary_band(low.mask(), radius, width, height);
  out.depth = out.bilinear;
  if (radius <= 0) return out;

  RenderOptions options;
  options.pixels = &out.band;
  options.workers = workers;
  const DepthRender rerender = render_depth(out.bilinear.camera, hull, field, spec, options);
  out.evaluations = rerender.evaluations;
  for (std::size_t i = 0; i < out.band.size(); ++i)
    if (out.band[i]) out.depth.depth[i] = rerender.map.depth[i];
  return out;
}

}  // namespace fvv
