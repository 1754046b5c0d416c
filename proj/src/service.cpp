#include "fvv/service.hpp"

#include "fvv/frame_output.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <set>

namespace fvv {

namespace {

ServiceResponse text(int status, const std::string &message) {
  ServiceResponse r;
  r.status = status;
  r.body = message + "\n";
  return r;
}

ServiceResponse json_error(int status, const std::string &message, const std::string &stage = "") {
  nlohmann::json doc = {{"error", message}};
  if (!stage.empty()) doc["stage"] = stage;
  ServiceResponse r;
  r.status = status;
  r.content_type = "application/json";
  r.body = doc.dump() + "\n";
  return r;
}

class BadRequest : public Error {
 public:
  using Error::Error;
};

const std::string *single(const std::multimap<std::string, std::string> &query, const std::string &key) {
  const auto range = query.equal_range(key);
  if (range.first == range.second) return nullptr;
  if (std::next(range.first) != range.second) throw BadRequest("parameter \"" + key + "\" given more than once");
  return &range.first->second;
}

double number(const std::multimap<std::string, std::string> &query, const std::string &key, double fallback) {
  const std::string *value = single(query, key);
  if (!value) return fallback;
  double out = 0.0;
  const char *end = value->data() + value->size();
  const auto [ptr, ec] = std::from_chars(value->data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out))
    throw BadRequest("parameter \"" + key + "\" is not a finite number: \"" + *value + "\"");
  return out;
}

int integer(const std::multimap<std::string, std::string> &query, const std::string &key, int fallback) {
  const std::string *value = single(query, key);
  if (!value) return fallback;
  int out = 0;
  const char *end = value->data() + value->size();
  const auto [ptr, ec] = std::from_chars(value->data(), end, out);
  if (ec != std::errc() || ptr != end) throw BadRequest("parameter \"" + key + "\" is not an integer: \"" + *value + "\"");
  return out;
}

std::string timing_header(const FrameResult &frame) {
  std::string out;
  for (const auto &t : frame.timings) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s=%.2f", out.empty() ? "" : ";", t.stage.c_str(), t.ms);
    out += buf;
  }
  return out;
}

}  // namespace

RenderService::RenderService(std::shared_ptr<const FramePipeline> pipeline, int max_resolution)
    : pipeline_(std::move(pipeline)), max_resolution_(max_resolution) {
  if (!pipeline_) throw ConfigError("render service needs a pipeline");
}

ServiceResponse RenderService::handle(const std::string &path, const std::multimap<std::string, std::string> &query) const {
  if (path == "/health") return health();
  if (path == "/rig") return rig();
  if (path == "/render") return render(query);
  return text(404, "not found: " + path);
}

ServiceResponse RenderService::health() const { return text(200, "ok"); }

ServiceResponse RenderService::rig() const {
  ServiceResponse r;
  r.content_type = "application/json";
  r.body = rig_to_json(pipeline_->capture().rig);
  return r;
}

ServiceResponse RenderService::render(const std::multimap<std::string, std::string> &query) const {
  static const std::set<std::string> known = {"yaw", "pitch", "dist", "mode", "res"};
  const auto &config = pipeline_->config();
  Camera target;
  FrameMode mode = FrameMode::Rgb;
  try {
    for (const auto &[key, value] : query)
      if (!known.count(key)) throw BadRequest("unknown parameter \"" + key + "\"");
    const double yaw = number(query, "yaw", 0.0);
    const double pitch = number(query, "pitch", 0.0);
    const double dist = number(query, "dist", config.rig_radius);
    const int res = integer(query, "res", config.hi_res);
    if (const std::string *m = single(query, "mode")) mode = parse_frame_mode(*m);
    if (pitch < -89.0 || pitch > 89.0) throw BadRequest("pitch must lie in [-89, 89]");
    if (!(dist > 0.0)) throw BadRequest("dist must be positive");
    if (res < 1 || res > max_resolution_)
      throw BadRequest("res must lie in [1, " + std::to_string(max_resolution_) + "]");
    target = target_camera(config, yaw, pitch, dist, res);
  } catch (const Error &e) {
    return json_error(400, e.what());
  }
  try {
    const FrameResult frame = pipeline_->run_frame(target);
    const auto png = frame_png(frame, mode);
    ServiceResponse r;
    r.content_type = "image/png";
    r.body.assign(png.begin(), png.end());
    r.headers["X-Stage-Timings"] = timing_header(frame);
    return r;
  } catch (const StageError &e) {
    return json_error(500, e.what(), e.stage());
  } catch (const std::exception &e) {
    return json_error(500, e.what(), "encode");
  }
}

struct RenderServer::Impl {
  std::shared_ptr<const RenderService> service;
  httplib::Server server;
};

RenderServer::RenderServer(std::shared_ptr<const RenderService> service) : impl_(std::make_unique<Impl>()) {
  if (!service) throw ConfigError("render server needs a service");
  impl_->service = std::move(service);
  auto handler = [svc = impl_->service](const httplib::Request &req, httplib::Response &res) {
    std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
    const ServiceResponse r = svc->handle(req.path, query);
    res.status = r.status;
    for (const auto &[k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  for (const char *path : {"/health", "/rig", "/render"}) impl_->server.Get(path, handler);
}

RenderServer::~RenderServer() { stop(); }

int RenderServer::bind(const std::string &host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ConfigError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool RenderServer::listen() { return impl_->server.listen_after_bind(); }

void RenderServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void RenderServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace fvv
