#include "fvv/pipeline.hpp"

#include "fvv/image_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace fvv {

void PipelineConfig::validate() const {
  auto positive = [](double v, const char *name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (cameras < 2) throw ConfigError("cameras must be >= 2");
  positive(rig_radius, "rig radius");
  if (!center.allFinite() || !std::isfinite(rig_height)) throw ConfigError("rig placement must be finite");
  if (capture_res < 1) throw ConfigError("capture resolution must be positive");
  positive(focal_ratio, "focal ratio");
  positive(volume_half_extent, "volume half extent");
  if (carve_spacing) positive(*carve_spacing, "carve spacing");
  if (k) positive(*k, "k");
  if (max_samples < 2) throw ConfigError("max samples must be >= 2");
  if (tau) positive(*tau, "tau");
  if (beta) positive(*beta, "beta");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be non-negative");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
  if (erosion_radius < 0) throw ConfigError("erosion radius must be non-negative");
  if (low_res < 1 || hi_res < 1) throw ConfigError("resolutions must be positive");
  if (hi_res < low_res) throw ConfigError("hi resolution must be >= low resolution");
  if (refine_iterations < 0) throw ConfigError("refine iterations must be non-negative");
  positive(refine_step, "refine step");
  if (!(refine_damping >= 0.0)) throw ConfigError("refine damping must be non-negative");
}

Aabb PipelineConfig::volume() const {
  const Vec3 half = Vec3::Constant(volume_half_extent);
  return {center - half, center + half};
}

void Capture::validate() const {
  rig.validate();
  if (images.size() != rig.size() || masks.size() != rig.size())
    throw ConfigError("capture needs one image and one mask per camera");
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto &cam = rig.cameras[i];
    if (images[i].width() != cam.width || images[i].height() != cam.height || !masks[i].same_shape(images[i]))
      throw ConfigError("capture view " + std::to_string(i) + " does not match its camera resolution");
  }
}

Capture Capture::subset(const std::vector<std::size_t> &indices) const {
  Capture out;
  out.rig = rig.subset(indices);
  for (auto i : indices) {
    out.images.push_back(images[i]);
    out.masks.push_back(masks[i]);
  }
  return out;
}

namespace {

std::string view_name(const char *prefix, std::size_t i, const char *ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02zu.%s", prefix, i, ext);
  return buf;
}

}  // namespace

void save_capture(const Capture &capture, const std::filesystem::path &dir) {
  capture.validate();
  std::filesystem::create_directories(dir);
  save_rig(capture.rig, dir / "rig.json");
  for (std::size_t i = 0; i < capture.rig.size(); ++i) {
    write_png(dir / view_name("view", i, "png"), capture.images[i]);
    write_mask_pgm(dir / view_name("mask", i, "pgm"), capture.masks[i]);
  }
}

Capture load_capture(const std::filesystem::path &dir) {
  Capture out;
  out.rig = load_rig(dir / "rig.json");
  for (std::size_t i = 0; i < out.rig.size(); ++i) {
    const auto path = dir / view_name("view", i, "png");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open capture image " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const DecodedPng png = decode_png(bytes);
    if (png.channels != 3) throw ParseError(path.string() + ": expected an RGB image");
    ImageRgb image(png.width, png.height, Color::Zero());
    for (std::size_t p = 0; p < image.size(); ++p)
      for (int c = 0; c < 3; ++c) image[p][c] = png.pixels[3 * p + c] / 255.0f;
    out.images.push_back(std::move(image));
    out.masks.push_back(read_mask_pgm(dir / view_name("mask", i, "pgm")));
  }
  out.validate();
  return out;
}

CameraRig config_rig(const PipelineConfig &config) {
  return make_rig(config.cameras, config.rig_radius, config.rig_height, config.center, config.capture_res,
                  config.focal(config.capture_res));
}

Capture capture_scene(const AnalyticScene &scene, const CameraRig &rig, unsigned workers) {
  Capture out;
  out.rig = rig;
  for (const auto &cam : rig.cameras) {
    auto gt = gt_render(scene, cam, workers);
    out.images.push_back(std::move(gt.rgb));
    out.masks.push_back(std::move(gt.mask));
  }
  return out;
}

Camera target_camera(const PipelineConfig &config, double yaw_deg, double pitch_deg, double dist,
                     std::optional<int> resolution) {
  const int res = resolution.value_or(config.hi_res);
  if (res < 1) throw ConfigError("target resolution must be positive");
  return orbit_camera(config.center, yaw_deg, pitch_deg, dist, res, config.focal(res));
}

std::vector<Camera> evaluation_targets(const PipelineConfig &config, int count) {
  if (count < 1) throw ConfigError("target count must be positive");
  std::vector<Camera> out;
  for (int j = 0; j < count; ++j) {
    // Offset from the rig azimuths and alternately above and below the ring.
    const double yaw = (j + 0.37) * 360.0 / count;
    const double pitch = 20.0 * std::sin(2.399963 * (j + 1));
    out.push_back(target_camera(config, yaw, pitch, config.rig_radius));
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto timed_stage(const char *name, std::vector<StageTiming> &timings, F &&body) {
  const auto start = Clock::now();
  auto record = [&] {
    timings.push_back({name, std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      record();
    } else {
      auto value = body();
      record();
      return value;
    }
  } catch (const StageError &) {
    throw;
  } catch (const std::exception &e) {
    throw StageError(name, e.what());
  }
}

std::shared_ptr<const OccupancyField> make_field(const PipelineConfig &config, const Capture &capture,
                                                 const std::optional<AnalyticScene> &scene, double tau) {
  if (config.backend == FieldBackend::Analytic) {
    if (!scene) throw ConfigError("analytic backend needs a scene");
    return oracle_field(*scene, tau);
  }
  std::vector<FeatureMap> features;
  for (std::size_t i = 0; i < capture.rig.size(); ++i)
    features.push_back(extract_features(capture.images[i], capture.masks[i]));
  MlpWeights f = config.occupancy_weights.empty() ? consensus_occupancy_mlp() : load_mlp(config.occupancy_weights);
  MlpWeights h = config.offset_weights.empty() ? zero_offset_mlp() : load_mlp(config.offset_weights);
  return std::make_shared<MultiViewField>(capture.rig.cameras, std::move(features), std::move(f), std::move(h));
}

}  // namespace

ImageRgb resample_image(const ImageRgb &image, int width, int height) {
  if (width < 1 || height < 1) throw ConfigError("resample size must be positive");
  ImageRgb out(width, height, Color::Zero());
  if (image.width() % width == 0 && image.height() % height == 0) {
    const int fx = image.width() / width;
    const int fy = image.height() / height;
    const float norm = 1.0f / static_cast<float>(fx * fy);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        Color sum = Color::Zero();
        for (int j = 0; j < fy; ++j)
          for (int i = 0; i < fx; ++i) sum += image(x * fx + i, y * fy + j);
        out(x, y) = sum * norm;
      }
    return out;
  }
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out(x, y) = sample_bilinear(image, Vec2((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5));
  return out;
}

FramePipeline::FramePipeline(PipelineConfig config, Capture capture, std::optional<AnalyticScene> scene,
                             std::shared_ptr<const OccupancyField> field)
    : config_(std::move(config)), capture_(std::move(capture)) {
  config_.validate();
  capture_.validate();
  const unsigned workers = config_.workers;
  const Aabb volume = config_.volume();

  timed_stage("carve", setup_timings_, [&] {
    const double spacing = config_.carve_spacing.value_or(default_carve_spacing(volume));
    hull_ = carve(capture_.rig, capture_.masks, volume, spacing, CarveTest::Conservative, workers);
    if (hull_.empty()) throw EmptyHullError("silhouettes carve away the whole volume");
  });

  timed_stage("field", setup_timings_, [&] {
    const Aabb box = hull_aabb(hull_);
    spec_.spacing = config_.k.value_or(default_sample_spacing(box));
    spec_.max_samples = config_.max_samples;
    spec_.early_termination = config_.early_termination;
    spec_.literal_offset_composition = config_.literal_offset_composition;
    spec_.validate();
    beta_ = config_.beta.value_or(2.0 * spec_.spacing);
    field_ = field ? std::move(field)
                   : make_field(config_, capture_, scene, config_.tau.value_or(0.01 * volume.diagonal()));
  });

  timed_stage("source-depth", setup_timings_, [&] {
    RenderOptions options;
    options.prune = config_.prune;
    options.workers = workers;
    for (std::size_t i = 0; i < capture_.rig.size(); ++i) {
      const Camera low = capture_.rig.cameras[i].resized(config_.low_res, config_.low_res);
      auto rendered = render_depth(low, hull_, *field_, spec_, options);
      source_evaluations_ += rendered.evaluations;
      source_normals_.push_back(normal_from_depth(rendered.map));
      source_depth_.push_back(std::move(rendered.map));
      source_rgb_low_.push_back(resample_image(capture_.images[i], config_.low_res, config_.low_res));
    }
  });
}

FrameResult FramePipeline::run_frame(const Camera &target) const {
  target.validate();
  const unsigned workers = config_.workers;
  FrameResult out;
  auto &timings = out.timings;
  const int hi_w = target.width;
  const int hi_h = target.height;
  const int low_w = std::min(config_.low_res, hi_w);
  const int low_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(hi_h) * low_w / hi_w)));
  const Camera target_low = target.resized(low_w, low_h);

  out.views = timed_stage("select", timings, [&] { return select_adjacent_views(capture_.rig, target); });
  const std::size_t i1 = out.views.first;
  const std::size_t i2 = out.views.second;

  timed_stage("depth", timings, [&] {
    RenderOptions options;
    options.prune = config_.prune;
    options.workers = workers;
    auto rendered = render_depth(target_low, hull_, *field_, spec_, options);
    out.field_evaluations += rendered.evaluations;
    out.depth_low = std::move(rendered.map);
  });

  struct SourceWarp {
    WarpedImage image;
    OcclusionMap occlusion;
    ScalarMap alignment;
  };
  auto warp_source = [&](std::size_t i) {
    const DepthMap &src_depth = source_depth_[i];
    const Mask src_mask = src_depth.mask();
    SourceWarp w;
    w.image = warp_image(src_depth.camera, source_rgb_low_[i], out.depth_low, &src_mask, workers);
    w.occlusion = occlusion_map(warp_depth(src_depth, out.depth_low, workers),
                                reproject_depth(src_depth.camera, out.depth_low));
    w.alignment = view_alignment(src_depth.camera, out.depth_low);
    return w;
  };
  const SourceWarp s1 = timed_stage("warp", timings, [&] { return warp_source(i1); });
  const SourceWarp s2 = timed_stage("warp", timings, [&] { return warp_source(i2); });

  out.weights_low = timed_stage("weights", timings, [&] {
    const HeuristicBlendProvider provider(beta_, config_.gamma);
    return provider.weights({s1.image, s1.occlusion, s1.alignment, s2.image, s2.occlusion, s2.alignment});
  });

  timed_stage("upsample", timings, [&] {
    auto up = upsample_boundary_aware(out.depth_low, hull_, *field_, spec_, hi_w, hi_h, config_.erosion_radius, workers);
    out.field_evaluations += up.evaluations;
    out.depth_hi = std::move(up.depth);
    out.band = std::move(up.band);
    out.weights = bilinear_upsample(out.weights_low, hi_w, hi_h);
  });

  timed_stage("blend", timings, [&] {
    const WarpedImage w1 = warp_image(capture_.rig.cameras[i1], capture_.images[i1], out.depth_hi, &capture_.masks[i1], workers);
    const WarpedImage w2 = warp_image(capture_.rig.cameras[i2], capture_.images[i2], out.depth_hi, &capture_.masks[i2], workers);
    out.color = blend(out.weights, w1.rgb, w2.rgb);
  });

  timed_stage("normals", timings, [&] {
    const NormalMap n1 = warp_normals(source_depth_[i1].camera, source_normals_[i1], out.depth_hi, workers);
    const NormalMap n2 = warp_normals(source_depth_[i2].camera, source_normals_[i2], out.depth_hi, workers);
    out.normal = blend_normals(n1, n2, out.weights);
  });

  timed_stage("refine", timings, [&] {
    NormalRefineOptions options;
    options.iterations = config_.refine_iterations;
    options.initial_step = config_.refine_step;
    options.damping = config_.refine_damping;
    auto refined = refine_depth_with_normal(out.depth_hi, out.normal, options);
    out.depth_refined = std::move(refined.depth);
    out.refine_residuals = std::move(refined.residuals);
  });
  return out;
}

ViewMetrics evaluate_frame(const FrameResult &frame, const AnalyticScene &scene, double lambda, unsigned workers) {
  const auto gt = gt_render(scene, frame.depth_hi.camera, workers);
  ViewMetrics m;
  m.mae_fg = mae(frame.color, gt.rgb, &gt.mask);
  m.mae_full = mae(frame.color, gt.rgb);
  m.l2_rgb = l2_rgb(frame.color, gt.rgb, &gt.mask);
  m.l2_normal = l2_normal(frame.normal, gt.normal, &gt.mask);
  m.combined = combined_loss(m.l2_rgb, m.l2_normal, lambda);
  m.depth_mae = depth_mae(frame.depth_refined, gt.depth, &gt.mask);
  m.normal_mean_angle_deg = normal_mean_angle_deg(frame.normal, gt.normal, &gt.mask);
  return m;
}

EvalReport evaluate_views(const FramePipeline &pipeline, const AnalyticScene &scene,
                          const std::vector<Camera> &targets, const std::string &scene_name) {
  const auto &config = pipeline.config();
  EvalReport report;
  report.scene = scene_name;
  report.rig_size = static_cast<int>(pipeline.capture().rig.size());
  report.low_res = config.low_res;
  report.hi_res = config.hi_res;
  report.k = pipeline.sample_spec().spacing;
  report.lambda = config.lambda;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const FrameResult frame = pipeline.run_frame(targets[j]);
    ViewMetrics m = evaluate_frame(frame, scene, config.lambda, config.workers);
    m.view_id = static_cast<int>(j);
    m.cameras = report.rig_size;
    report.views.push_back(m);
  }
  report.finalize();
  return report;
}

std::vector<std::size_t> even_subset(std::size_t n, std::size_t m) {
  if (m < 2) throw ConfigError("camera subsets need at least 2 cameras");
  if (m > n) throw ConfigError("camera subset larger than the rig");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m; ++i)
    out.push_back(static_cast<std::size_t>(std::lround(static_cast<double>(i * n) / static_cast<double>(m))) % n);
  return out;
}

std::vector<EvalReport> ablate_cameras(const AnalyticScene &scene, const CameraRig &base_rig,
                                       const PipelineConfig &config, const std::vector<int> &subset_sizes,
                                       const std::vector<Camera> &targets, const std::string &scene_name) {
  for (int m : subset_sizes)
    if (m < 2) throw ConfigError("camera subsets need at least 2 cameras");
  const Capture full = capture_scene(scene, base_rig, config.workers);
  std::vector<EvalReport> reports;
  for (int m : subset_sizes) {
    const auto indices = even_subset(base_rig.size(), static_cast<std::size_t>(m));
    FramePipeline pipeline(config, full.subset(indices), scene);
    reports.push_back(evaluate_views(pipeline, scene, targets, scene_name));
  }
  return reports;
}

}  // namespace fvv
