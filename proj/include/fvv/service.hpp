#pragma once

#include "fvv/pipeline.hpp"

#include <map>
#include <memory>
#include <string>

namespace fvv {

struct ServiceResponse {
  int status = 200;
  std::string content_type = "text/plain";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Request handling over a shared immutable pipeline. Every request is
/// independent; handle() is safe to call concurrently.
class RenderService {
 public:
  explicit RenderService(std::shared_ptr<const FramePipeline> pipeline, int max_resolution = 2048);

  ServiceResponse handle(const std::string &path, const std::multimap<std::string, std::string> &query) const;

  ServiceResponse health() const;
  ServiceResponse rig() const;
  /// yaw, pitch (degrees), dist, mode, res; all optional.
  ServiceResponse render(const std::multimap<std::string, std::string> &query) const;

  const FramePipeline &pipeline() const { return *pipeline_; }

 private:
  std::shared_ptr<const FramePipeline> pipeline_;
  int max_resolution_;
};

/// HTTP/1.1 front end for RenderService.
class RenderServer {
 public:
  explicit RenderServer(std::shared_ptr<const RenderService> service);
  ~RenderServer();
  RenderServer(const RenderServer &) = delete;
  RenderServer &operator=(const RenderServer &) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the port.
  int bind(const std::string &host, int port);
  /// Serves until stop(); returns false if the listener failed.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fvv
