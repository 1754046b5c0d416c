#include "fvv/frame_output.hpp"
#include "fvv/image_io.hpp"
#include "fvv/pipeline.hpp"
#include "fvv/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace fvv;

struct Options {
  PipelineConfig config;
  std::string scene_path;
  std::string bundle_path;
  std::string rig_path;
  std::string out_dir = "out";
  std::string backend = "analytic";
  double k = 0.0, tau = 0.0, beta = 0.0, carve_spacing = 0.0;
  bool no_prune = false;
  bool no_early_termination = false;

  // render
  double yaw = 30.0, pitch = 10.0, dist = 0.0;
  int res = 0;

  // eval / ablate
  std::vector<int> cams;
  int targets = 30;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

void add_pipeline_options(CLI::App &cmd, Options &o) {
  auto &c = o.config;
  cmd.add_option("--scene", o.scene_path, "Scene JSON file");
  cmd.add_option("--bundle", o.bundle_path, "Capture bundle directory (rig.json, view_NN.png, mask_NN.pgm)");
  cmd.add_option("--rig", o.rig_path, "Rig JSON file (default: ring from --cameras/--radius)");
  cmd.add_option("--cameras", c.cameras, "Ring camera count")->capture_default_str();
  cmd.add_option("--radius", c.rig_radius, "Ring radius")->capture_default_str();
  cmd.add_option("--height", c.rig_height, "Ring height above the center")->capture_default_str();
  cmd.add_option("--capture-res", c.capture_res, "Input view resolution")->capture_default_str();
  cmd.add_option("--focal-ratio", c.focal_ratio, "Focal length / resolution")->capture_default_str();
  cmd.add_option("--volume", c.volume_half_extent, "Half extent of the carving volume")->capture_default_str();
  cmd.add_option("--carve-spacing", o.carve_spacing, "Voxel size (default: volume diagonal / 128)");
  cmd.add_option("--k", o.k, "Sample spacing (default: hull box diagonal / 256)");
  cmd.add_option("--max-samples", c.max_samples, "Samples per ray")->capture_default_str();
  cmd.add_option("--tau", o.tau, "Analytic occupancy sharpness (default: 0.01 x volume diagonal)");
  cmd.add_option("--beta", o.beta, "Occlusion scale of the blend weights (default: 2k)");
  cmd.add_option("--gamma", c.gamma, "View-angle gain of the blend weights")->capture_default_str();
  cmd.add_option("--lambda", c.lambda, "Appearance/normal loss mix")->capture_default_str();
  cmd.add_option("-r,--erosion-radius", c.erosion_radius, "Boundary band radius (low-res pixels)")->capture_default_str();
  cmd.add_option("--low-res", c.low_res, "Geometry resolution")->capture_default_str();
  cmd.add_option("--hi-res", c.hi_res, "Output resolution")->capture_default_str();
  cmd.add_option("--backend", o.backend, "Occupancy backend")->check(CLI::IsMember({"analytic", "mlp"}))->capture_default_str();
  cmd.add_option("--occupancy-weights", c.occupancy_weights, "MLP weight file for occupancy");
  cmd.add_option("--offset-weights", c.offset_weights, "MLP weight file for offsets");
  cmd.add_option("--refine-iters", c.refine_iterations, "Normal refinement iterations")->capture_default_str();
  cmd.add_flag("--no-prune", o.no_prune, "Sample the whole carving volume");
  cmd.add_flag("--no-early-termination", o.no_early_termination, "Walk every sample on each ray");
  cmd.add_flag("--literal-offset", c.literal_offset_composition, "Compose refined depth from the midpoint");
  cmd.add_option("--workers", c.workers, "Worker threads (default: FVV_WORKERS or hardware)");
}

void finish_config(Options &o) {
  auto &c = o.config;
  if (o.k > 0) c.k = o.k;
  if (o.tau > 0) c.tau = o.tau;
  if (o.beta > 0) c.beta = o.beta;
  if (o.carve_spacing > 0) c.carve_spacing = o.carve_spacing;
  c.prune = !o.no_prune;
  c.early_termination = !o.no_early_termination;
  c.backend = o.backend == "mlp" ? FieldBackend::Mlp : FieldBackend::Analytic;
  c.validate();
}

std::optional<AnalyticScene> scene_of(const Options &o) {
  if (o.scene_path.empty()) return std::nullopt;
  return load_scene(o.scene_path);
}

const AnalyticScene &require_scene(const std::optional<AnalyticScene> &scene) {
  if (!scene) throw ConfigError("--scene is required");
  return *scene;
}

CameraRig rig_of(const Options &o) { return o.rig_path.empty() ? config_rig(o.config) : load_rig(o.rig_path); }

Capture capture_of(const Options &o, const std::optional<AnalyticScene> &scene) {
  if (!o.bundle_path.empty()) return load_capture(o.bundle_path);
  return capture_scene(require_scene(scene), rig_of(o), o.config.workers);
}

void print_timings(const char *label, const std::vector<StageTiming> &timings) {
  std::printf("%s:", label);
  for (const auto &t : timings) std::printf(" %s=%.1fms", t.stage.c_str(), t.ms);
  std::printf("\n");
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string hull_json(const VoxelHull &hull) {
  nlohmann::json runs = nlohmann::json::array();
  std::size_t i = 0;
  while (i < hull.occupancy.size()) {
    if (!hull.occupancy[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < hull.occupancy.size() && hull.occupancy[j]) ++j;
    runs.push_back({i, j - i});
    i = j;
  }
  nlohmann::json doc = {{"origin", {hull.origin.x(), hull.origin.y(), hull.origin.z()}},
                        {"spacing", hull.spacing},
                        {"dims", hull.dims},
                        {"occupied", hull.occupied_count()},
                        {"runs", runs}};
  return doc.dump() + "\n";
}

int cmd_capture(Options &o) {
  const auto scene = scene_of(o);
  const Capture capture = capture_scene(require_scene(scene), rig_of(o), o.config.workers);
  save_capture(capture, o.out_dir);
  std::printf("wrote %zu views to %s\n", capture.rig.size(), o.out_dir.c_str());
  return 0;
}

int cmd_carve(Options &o) {
  const auto scene = scene_of(o);
  FramePipeline pipeline(o.config, capture_of(o, scene), scene);
  std::filesystem::create_directories(o.out_dir);
  const auto &hull = pipeline.hull();
  write_text(std::filesystem::path(o.out_dir) / "hull.json", hull_json(hull));
  const auto &masks = pipeline.capture().masks;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "mask_%02zu.pgm", i);
    write_mask_pgm(std::filesystem::path(o.out_dir) / name, masks[i]);
  }
  print_timings("setup", pipeline.setup_timings());
  std::printf("hull: %zu of %d x %d x %d voxels occupied, spacing %g\n", hull.occupied_count(), hull.dims[0],
              hull.dims[1], hull.dims[2], hull.spacing);
  return 0;
}

int cmd_render(Options &o) {
  const auto scene = scene_of(o);
  FramePipeline pipeline(o.config, capture_of(o, scene), scene);
  const double dist = o.dist > 0 ? o.dist : o.config.rig_radius;
  const Camera target = target_camera(o.config, o.yaw, o.pitch, dist, o.res > 0 ? std::optional<int>(o.res) : std::nullopt);
  const FrameResult frame = pipeline.run_frame(target);
  write_frame(frame, o.out_dir);
  print_timings("setup", pipeline.setup_timings());
  print_timings("frame", frame.timings);
  std::printf("views %zu,%zu; field evaluations %zu; wrote %s\n", frame.views.first, frame.views.second,
              frame.field_evaluations, o.out_dir.c_str());
  return 0;
}

int cmd_eval(Options &o, bool ablate) {
  const auto scene_opt = scene_of(o);
  const AnalyticScene &scene = require_scene(scene_opt);
  const CameraRig rig = rig_of(o);
  std::vector<int> cams = o.cams;
  if (cams.empty()) cams = ablate ? std::vector<int>{2, 4, 6} : std::vector<int>{static_cast<int>(rig.size())};
  const auto targets = evaluation_targets(o.config, o.targets);
  const auto name = std::filesystem::path(o.scene_path).stem().string();
  const auto reports = ablate_cameras(scene, rig, o.config, cams, targets, name);
  std::filesystem::create_directories(o.out_dir);
  write_text(std::filesystem::path(o.out_dir) / "report.csv", reports_to_csv(reports));
  write_text(std::filesystem::path(o.out_dir) / "report.json", reports_to_json(reports));
  for (const auto &r : reports)
    std::printf("cameras %d: mae_fg %.3f mae_full %.3f depth_mae %.5f normal_angle %.2f deg\n", r.rig_size,
                r.aggregate.mae_fg, r.aggregate.mae_full, r.aggregate.depth_mae, r.aggregate.normal_mean_angle_deg);
  return 0;
}

RenderServer *g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(Options &o) {
  const auto scene = scene_of(o);
  auto pipeline = std::make_shared<const FramePipeline>(o.config, capture_of(o, scene), scene);
  print_timings("setup", pipeline->setup_timings());
  auto service = std::make_shared<const RenderService>(pipeline);
  RenderServer server(service);
  const int port = server.bind(o.host, o.port);
  std::printf("listening on http://%s:%d\n", o.host.c_str(), port);
  std::fflush(stdout);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const bool ok = server.listen();
  g_server = nullptr;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Free-viewpoint rendering from a sparse camera ring"};
  app.require_subcommand(1);
  Options o;

  auto *capture = app.add_subcommand("capture", "Render a scene from the rig into an input bundle");
  auto *carve = app.add_subcommand("carve", "Carve the visual hull and write hull.json plus masks");
  auto *render = app.add_subcommand("render", "Render one novel view");
  auto *eval = app.add_subcommand("eval", "Score novel views against ground truth");
  auto *ablate = app.add_subcommand("ablate", "Score camera subsets (default 2,4,6)");
  auto *serve = app.add_subcommand("serve", "Serve renders over HTTP");
  for (auto *cmd : {capture, carve, render, eval, ablate, serve}) {
    add_pipeline_options(*cmd, o);
    if (cmd != serve) cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  }
  render->add_option("--yaw", o.yaw, "Azimuth in degrees")->capture_default_str();
  render->add_option("--pitch", o.pitch, "Elevation in degrees")->capture_default_str();
  render->add_option("--dist", o.dist, "Distance from the rig center (default: rig radius)");
  render->add_option("--res", o.res, "Output resolution (default: --hi-res)");
  for (auto *cmd : {eval, ablate}) {
    cmd->add_option("--cams", o.cams, "Camera subset sizes")->delimiter(',');
    cmd->add_option("--targets", o.targets, "Number of target views")->capture_default_str();
  }
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--port", o.port, "Port (0 picks a free one)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    finish_config(o);
    if (*capture) return cmd_capture(o);
    if (*carve) return cmd_carve(o);
    if (*render) return cmd_render(o);
    if (*eval) return cmd_eval(o, false);
    if (*ablate) return cmd_eval(o, true);
    if (*serve) return cmd_serve(o);
  } catch (const StageError &e) {
    std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
