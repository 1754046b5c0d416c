#include "fvv/frame_output.hpp"
#include "fvv/pipeline.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace fvv;

namespace {

py::array_t<float> to_array(const ImageRgb &img) {
  py::array_t<float> out({img.height(), img.width(), 3});
  auto v = out.mutable_unchecked<3>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) v(y, x, c) = img(x, y)[c];
  return out;
}

py::array_t<double> to_array(const ScalarMap &m) {
  py::array_t<double> out({m.height(), m.width()});
  auto v = out.mutable_unchecked<2>();
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) v(y, x) = m(x, y);
  return out;
}

py::array_t<double> to_array(const NormalMap &n) {
  const int w = n.normals.width(), h = n.normals.height();
  py::array_t<double> out({h, w, 3});
  auto v = out.mutable_unchecked<3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) v(y, x, c) = n.valid(x, y) ? n.normals(x, y)[c] : 0.0;
  return out;
}

py::array_t<bool> to_array(const Mask &m) {
  py::array_t<bool> out({m.height(), m.width()});
  auto v = out.mutable_unchecked<2>();
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) v(y, x) = m(x, y) != 0;
  return out;
}

py::dict frame_dict(const FrameResult &f) {
  py::dict d;
  d["color"] = to_array(f.color);
  d["depth"] = to_array(f.depth_refined.depth);
  d["depth_upsampled"] = to_array(f.depth_hi.depth);
  d["depth_low"] = to_array(f.depth_low.depth);
  d["normal"] = to_array(f.normal);
  d["weights"] = to_array(f.weights);
  d["band"] = to_array(f.band);
  d["views"] = py::make_tuple(f.views.first, f.views.second);
  d["field_evaluations"] = f.field_evaluations;
  d["refine_residuals"] = f.refine_residuals;
  py::dict t;
  for (const auto &s : f.timings) t[py::str(s.stage)] = s.ms;
  d["timings_ms"] = t;
  return d;
}

py::dict metrics_dict(const ViewMetrics &m) {
  py::dict d;
  d["view_id"] = m.view_id;
  d["cameras"] = m.cameras;
  d["mae_fg"] = m.mae_fg;
  d["mae_full"] = m.mae_full;
  d["l2_rgb"] = m.l2_rgb;
  d["l2_normal"] = m.l2_normal;
  d["combined"] = m.combined;
  d["depth_mae"] = m.depth_mae;
  d["normal_mean_angle_deg"] = m.normal_mean_angle_deg;
  return d;
}

class PyPipeline {
 public:
  PyPipeline(const PipelineConfig &config, const AnalyticScene &scene)
      : scene_(scene), pipeline_(config, capture_scene(scene, config_rig(config), config.workers), scene) {}

  py::dict render(double yaw, double pitch, std::optional<double> dist, std::optional<int> res) const {
    const Camera target = target_camera(pipeline_.config(), yaw, pitch, dist.value_or(pipeline_.config().rig_radius), res);
    FrameResult frame;
    {
      py::gil_scoped_release release;
      frame = pipeline_.run_frame(target);
    }
    return frame_dict(frame);
  }

  py::bytes render_png(double yaw, double pitch, const std::string &mode) const {
    const Camera target = target_camera(pipeline_.config(), yaw, pitch, pipeline_.config().rig_radius);
    std::vector<std::uint8_t> png;
    {
      py::gil_scoped_release release;
      png = frame_png(pipeline_.run_frame(target), parse_frame_mode(mode));
    }
    return py::bytes(reinterpret_cast<const char *>(png.data()), png.size());
  }

  py::dict evaluate(double yaw, double pitch) const {
    const Camera target = target_camera(pipeline_.config(), yaw, pitch, pipeline_.config().rig_radius);
    ViewMetrics m;
    {
      py::gil_scoped_release release;
      m = evaluate_frame(pipeline_.run_frame(target), scene_, pipeline_.config().lambda, pipeline_.config().workers);
    }
    return metrics_dict(m);
  }

  std::size_t hull_voxels() const { return pipeline_.hull().occupied_count(); }
  double k() const { return pipeline_.sample_spec().spacing; }
  std::string rig_json() const { return rig_to_json(pipeline_.capture().rig); }

 private:
  AnalyticScene scene_;
  FramePipeline pipeline_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Free-viewpoint rendering over analytic scenes.";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<ParseError> parse_error(m, "ParseError", base.ptr());
  static py::exception<ValidationError> validation_error(m, "ValidationError", base.ptr());
  static py::exception<InputError> input_error(m, "InputError", base.ptr());
  static py::exception<StageError> stage_error(m, "StageError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError &e) {
      py::set_error(config_error, e.what());
    } catch (const ParseError &e) {
      py::set_error(parse_error, e.what());
    } catch (const ValidationError &e) {
      py::set_error(validation_error, e.what());
    } catch (const InputError &e) {
      py::set_error(input_error, e.what());
    } catch (const StageError &e) {
      py::set_error(stage_error, e.what());
    } catch (const Error &e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<AnalyticScene>(m, "Scene")
      .def("sdf", [](const AnalyticScene &s, double x, double y, double z) { return s.sdf(Vec3(x, y, z)); })
      .def("to_json", &scene_to_json)
      .def_static("from_json", &scene_from_json)
      .def_static("load", [](const std::filesystem::path &p) { return load_scene(p); })
      .def_property_readonly("primitive_count", [](const AnalyticScene &s) { return s.primitives.size(); });
  m.def("sphere_checker_scene", &sphere_checker_scene);
  m.def("two_sphere_scene", &two_sphere_scene);

  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def_readwrite("cameras", &PipelineConfig::cameras)
      .def_readwrite("rig_radius", &PipelineConfig::rig_radius)
      .def_readwrite("rig_height", &PipelineConfig::rig_height)
      .def_readwrite("capture_res", &PipelineConfig::capture_res)
      .def_readwrite("focal_ratio", &PipelineConfig::focal_ratio)
      .def_readwrite("volume_half_extent", &PipelineConfig::volume_half_extent)
      .def_readwrite("k", &PipelineConfig::k)
      .def_readwrite("tau", &PipelineConfig::tau)
      .def_readwrite("beta", &PipelineConfig::beta)
      .def_readwrite("gamma", &PipelineConfig::gamma)
      .def_readwrite("lambda_", &PipelineConfig::lambda)
      .def_readwrite("max_samples", &PipelineConfig::max_samples)
      .def_readwrite("erosion_radius", &PipelineConfig::erosion_radius)
      .def_readwrite("low_res", &PipelineConfig::low_res)
      .def_readwrite("hi_res", &PipelineConfig::hi_res)
      .def_readwrite("refine_iterations", &PipelineConfig::refine_iterations)
      .def_readwrite("workers", &PipelineConfig::workers)
      .def("validate", &PipelineConfig::validate);

  py::class_<PyPipeline>(m, "Pipeline")
      .def(py::init<const PipelineConfig &, const AnalyticScene &>(), py::arg("config"), py::arg("scene"))
      .def("render", &PyPipeline::render, py::arg("yaw"), py::arg("pitch") = 0.0, py::arg("dist") = py::none(),
           py::arg("res") = py::none())
      .def("render_png", &PyPipeline::render_png, py::arg("yaw"), py::arg("pitch") = 0.0, py::arg("mode") = "rgb")
      .def("evaluate", &PyPipeline::evaluate, py::arg("yaw"), py::arg("pitch") = 0.0)
      .def_property_readonly("hull_voxels", &PyPipeline::hull_voxels)
      .def_property_readonly("k", &PyPipeline::k)
      .def("rig_json", &PyPipeline::rig_json);

  m.def("even_subset", &even_subset, py::arg("n"), py::arg("m"));
  m.def("ablate", [](const PipelineConfig &config, const AnalyticScene &scene, const std::vector<int> &sizes, int targets) {
    std::vector<EvalReport> reports;
    {
      py::gil_scoped_release release;
      reports = ablate_cameras(scene, config_rig(config), config, sizes, evaluation_targets(config, targets));
    }
    py::list out;
    for (const auto &r : reports) {
      py::dict d = metrics_dict(r.aggregate);
      py::list views;
      for (const auto &v : r.views) views.append(metrics_dict(v));
      d["views"] = views;
      out.append(d);
    }
    return out;
  }, py::arg("config"), py::arg("scene"), py::arg("sizes"), py::arg("targets") = 30);
}
