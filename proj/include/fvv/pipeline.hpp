#pragma once

#include "fvv/blend.hpp"
#include "fvv/depth_render.hpp"
#include "fvv/field.hpp"
#include "fvv/hull.hpp"
#include "fvv/metrics.hpp"
#include "fvv/normals.hpp"
#include "fvv/scene.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fvv {

enum class FieldBackend { Analytic, Mlp };

struct PipelineConfig {
  // Rig built by make_rig unless a rig is supplied explicitly.
  int cameras = 6;
  double rig_radius = 3.0;
  double rig_height = 0.0;
  Vec3 center = Vec3::Zero();
  int capture_res = 1024;
  double focal_ratio = 0.9;  // focal length in pixels = ratio * resolution

  double volume_half_extent = 1.2;   // carving volume = center +- this
  std::optional<double> carve_spacing;  // default: volume diagonal / 128
  std::optional<double> k;              // default: hull box diagonal / 256
  int max_samples = 512;
  std::optional<double> tau;            // default: 0.01 * volume diagonal
  std::optional<double> beta;           // default: 2k
  double gamma = 4.0;
  double lambda = 0.5;
  int erosion_radius = 2;
  int low_res = 256;
  int hi_res = 1024;

  FieldBackend backend = FieldBackend::Analytic;
  std::string occupancy_weights;  // mlp backend; empty = built-in consensus net
  std::string offset_weights;

  int refine_iterations = 50;
  double refine_step = 0.5;
  double refine_damping = 1e-2;

  bool prune = true;
  bool early_termination = true;
  bool literal_offset_composition = false;
  unsigned workers = 0;

  void validate() const;
  Aabb volume() const;
  double focal(int resolution) const { return focal_ratio * resolution; }
};

/// Input views: one calibrated image and silhouette per rig camera.
struct Capture {
  CameraRig rig;
  std::vector<ImageRgb> images;
  std::vector<Mask> masks;

  void validate() const;
  Capture subset(const std::vector<std::size_t> &indices) const;
};

/// Input bundle directory: rig.json, view_NN.png, mask_NN.pgm.
void save_capture(const Capture &capture, const std::filesystem::path &dir);
Capture load_capture(const std::filesystem::path &dir);

CameraRig config_rig(const PipelineConfig &config);
/// Ground-truth renders of the scene from every rig camera.
Capture capture_scene(const AnalyticScene &scene, const CameraRig &rig, unsigned workers = 0);

/// Orbit target around the rig center using the config's intrinsics.
Camera target_camera(const PipelineConfig &config, double yaw_deg, double pitch_deg, double dist,
                     std::optional<int> resolution = std::nullopt);
/// Deterministic novel views spread around the subject, off the rig ring.
std::vector<Camera> evaluation_targets(const PipelineConfig &config, int count);

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct FrameResult {
  AdjacentViews views{0, 1};
  DepthMap depth_low;       // refined depth at low resolution
  DepthMap depth_hi;        // boundary-aware upsampled depth
  DepthMap depth_refined;   // after normal-driven refinement
  NormalMap normal;         // blended target normals
  BlendWeightMap weights_low;
  BlendWeightMap weights;   // upsampled
  ImageRgb color;
  Mask band;
  std::vector<double> refine_residuals;
  std::size_t field_evaluations = 0;  // target low-res render + band re-render
  std::vector<StageTiming> timings;
};

/// Immutable per-scene state: capture, hull, field and per-source low-res
/// geometry. run_frame is const and safe to call concurrently.
class FramePipeline {
 public:
  FramePipeline(PipelineConfig config, Capture capture, std::optional<AnalyticScene> scene = std::nullopt,
                std::shared_ptr<const OccupancyField> field = nullptr);

  FrameResult run_frame(const Camera &target) const;

  const PipelineConfig &config() const { return config_; }
  const Capture &capture() const { return capture_; }
  const VoxelHull &hull() const { return hull_; }
  const SampleSpec &sample_spec() const { return spec_; }
  const OccupancyField &field() const { return *field_; }
  double beta() const { return beta_; }
  std::size_t source_evaluations() const { return source_evaluations_; }
  const std::vector<StageTiming> &setup_timings() const { return setup_timings_; }

 private:
  PipelineConfig config_;
  Capture capture_;
  VoxelHull hull_;
  SampleSpec spec_;
  std::shared_ptr<const OccupancyField> field_;
  double beta_ = 0.0;
  std::vector<DepthMap> source_depth_;
  std::vector<NormalMap> source_normals_;
  std::vector<ImageRgb> source_rgb_low_;
  std::size_t source_evaluations_ = 0;
  std::vector<StageTiming> setup_timings_;
};

/// Box-filter downsample by an integer factor, bilinear otherwise.
ImageRgb resample_image(const ImageRgb &image, int width, int height);

/// Scores a frame against the analytic ground truth of its hi-res target.
ViewMetrics evaluate_frame(const FrameResult &frame, const AnalyticScene &scene, double lambda,
                           unsigned workers = 0);

/// Runs and scores the pipeline on each target.
EvalReport evaluate_views(const FramePipeline &pipeline, const AnalyticScene &scene,
                          const std::vector<Camera> &targets, const std::string &scene_name = "");

/// Indices of m cameras spread evenly over an n-camera ring: round(i * n / m).
std::vector<std::size_t> even_subset(std::size_t n, std::size_t m);

/// One report per subset size, each over the same targets. The capture of the
/// full rig is reused so every subset sees identical input images.
std::vector<EvalReport> ablate_cameras(const AnalyticScene &scene, const CameraRig &base_rig,
                                       const PipelineConfig &config, const std::vector<int> &subset_sizes,
                                       const std::vector<Camera> &targets, const std::string &scene_name = "");

}  // namespace fvv
