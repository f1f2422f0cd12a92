#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "fieldlog/service.hpp"

namespace fieldlog::http {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> web_root;  // served under /app/
};

/// HTTP front end for a Service: /api/v1/* plus the static /app/ mount.
class Server {
 public:
  Server(service::Service& service, ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the bound port. Throws Error(io_error).
  int bind();

  /// Serves until stop(); bind() must have succeeded.
  void run();

  /// bind() + run() on a background thread; returns once accepting.
  int start();

  void stop();
  [[nodiscard]] int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fieldlog::http
