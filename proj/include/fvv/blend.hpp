#pragma once

#include "fvv/camera.hpp"
#include "fvv/depth_render.hpp"
#include "fvv/raster.hpp"

#include <memory>

namespace fvv {

struct AdjacentViews {
  std::size_t first;   // smallest angle to the target
  std::size_t second;
};

/// The two rig cameras whose direction from the rig center makes the smallest
/// angle with the target's; ties go to the lower index.
AdjacentViews select_adjacent_views(const CameraRig &rig, const Camera &target);

/// A source image resampled into the target view. Invalid pixels hold zero.
struct WarpedImage {
  ImageRgb rgb;
  Mask valid;
};

/// Per-pixel scalar with validity (warped depth, reprojected depth, O_i).
struct ValidMap {
  ScalarMap values;
  Mask valid;
};

using OcclusionMap = ValidMap;

/// Unprojects each foreground target pixel with its depth and samples the
/// source image bilinearly at its projection. When `src_mask` is given only
/// foreground source taps contribute.
WarpedImage warp_image(const Camera &src, const ImageRgb &src_rgb, const DepthMap &target_depth,
                       const Mask *src_mask = nullptr, unsigned workers = 0);

/// Source depth (in the source camera) sampled at the projection of each
/// target surface point; only foreground source taps contribute.
ValidMap warp_depth(const DepthMap &src_depth, const DepthMap &target_depth, unsigned workers = 0);

/// Depth of each target surface point re-expressed in the source camera.
ValidMap reproject_depth(const Camera &src, const DepthMap &target_depth);

/// O = warped - reprojected where both are valid. O near zero means the source
/// sees the target surface point; strongly negative O means the source saw a
/// nearer surface.
OcclusionMap occlusion_map(const ValidMap &warped_src_depth, const ValidMap &reprojected_target_depth);

/// Cosine between the target viewing ray and the source viewing ray at each
/// target surface point (1 where the views agree); 0 on background.
ScalarMap view_alignment(const Camera &src, const DepthMap &target_depth);

using BlendWeightMap = ScalarMap;

struct BlendInputs {
  const WarpedImage &image1;
  const OcclusionMap &occlusion1;
  const ScalarMap &alignment1;
  const WarpedImage &image2;
  const OcclusionMap &occlusion2;
  const ScalarMap &alignment2;
};

/// Produces the per-pixel weight W of the first view.
class BlendWeightProvider {
 public:
  virtual ~BlendWeightProvider() = default;
  virtual BlendWeightMap weights(const BlendInputs &in) const = 0;
};

/// W = logistic((|O2| - |O1|) / beta + gamma * (a1 - a2)). A pixel usable in
/// only one view selects it outright; a pixel usable in neither gets 0.5.
class HeuristicBlendProvider final : public BlendWeightProvider {
 public:
  HeuristicBlendProvider(double beta, double gamma);
  BlendWeightMap weights(const BlendInputs &in) const override;

  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

 private:
  double beta_;
  double gamma_;
};

/// I = W * I1 + (1 - W) * I2 per pixel and channel.
ImageRgb blend(const BlendWeightMap &weights, const ImageRgb &image1, const ImageRgb &image2);

/// Bilinear resampling with pixel centers aligned (half-pixel convention).
BlendWeightMap bilinear_upsample(const BlendWeightMap &weights, int width, int height);

/// Bilinear depth upsampling; a high-res pixel is foreground only when every
/// contributing low-res tap is foreground.
DepthMap bilinear_upsample(const DepthMap &depth, int width, int height);

/// Square-window morphology on masks.
Mask dilate(const Mask &mask, int radius);
Mask erode(const Mask &mask, int radius);

/// The high-res boundary band: morphological gradient of the low-res
/// foreground mask with square radius r, nearest-upsampled, then dilated by r
/// high-res pixels. Empty for r = 0.
Mask boundary_band(const Mask &low_mask, int radius, int width, int height);

struct BoundaryUpsample {
  DepthMap depth;       // D-hat
  DepthMap bilinear;    // naive bilinear reference
  Mask band;
  std::size_t evaluations = 0;
};

/// Bilinear upsample, then re-render the boundary band at full resolution.
BoundaryUpsample upsample_boundary_aware(const DepthMap &low, const VoxelHull &hull, const OccupancyField &field,
                                         const SampleSpec &spec, int width, int height, int radius,
                                         unsigned workers = 0);

}  // namespace fvv
