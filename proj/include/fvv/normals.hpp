#pragma once

#include "fvv/blend.hpp"
#include "fvv/depth_render.hpp"

#include <vector>

namespace fvv {

/// Unit camera-space normals facing the camera, with validity.
struct NormalMap {
  Raster<Vec3> normals;
  Mask valid;

  NormalMap() = default;
  NormalMap(int width, int height) : normals(width, height, Vec3::Zero()), valid(width, height, 0) {}
};

/// Normals from central differences of unprojected positions. Pixels whose
/// 4-neighbour stencil leaves the image or touches background are invalid.
NormalMap normal_from_depth(const DepthMap &depth);

/// Source normals sampled at the projection of each target surface point and
/// rotated into the target camera frame.
NormalMap warp_normals(const Camera &src, const NormalMap &src_normals, const DepthMap &target_depth,
                       unsigned workers = 0);

/// N = normalize(W n1 + (1 - W) n2) using the texture blend weights. A pixel
/// with only one valid input takes it; antipodal inputs at W = 0.5 are
/// invalid.
NormalMap blend_normals(const NormalMap &n1, const NormalMap &n2, const BlendWeightMap &weights);

/// Mean of |n(depth) - target|^2 over pixels where both normals are valid and
/// `mask` (when given) is set. Throws UndefinedMetricError if none qualify.
double normal_residual(const DepthMap &depth, const NormalMap &target, const Mask *mask = nullptr);

struct NormalRefineOptions {
  int iterations = 200;
  double initial_step = 0.5;
  double damping = 1e-2;  // mu
  int history = 8;        // quasi-Newton memory
};

struct NormalRefineResult {
  DepthMap depth;
  /// Data residual before the first and after every accepted iteration.
  std::vector<double> residuals;
  int accepted_iterations = 0;
};

/// Minimizes mean |n(D + d) - N|^2 + mu * mean d^2 over a per-pixel
/// displacement d on the foreground, with backtracking line search. A step is
/// accepted only if it lowers the objective without raising the data term.
NormalRefineResult refine_depth_with_normal(const DepthMap &depth, const NormalMap &target,
                                            const NormalRefineOptions &options = {});

}  // namespace fvv
