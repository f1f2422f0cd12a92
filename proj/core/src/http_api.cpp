#include "fieldlog/http_api.hpp"

#include <map>
#include <thread>

// curl posts files as form-urlencoded by default; allow the full body limit.
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (10 * 1024 * 1024)
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"
#include "fieldlog/record_io.hpp"

namespace fieldlog::http {
namespace {

constexpr const char* kJson = "application/json";

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::payload_too_large: return 413;
    case ErrorCode::not_found: return 404;
    case ErrorCode::io_error: return 500;
    default: return 400;
  }
}

void send_error(httplib::Response& res, int status, std::string_view error, const std::string& detail) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", error}, {"detail", detail}}.dump(), kJson);
}

void send_json(httplib::Response& res, const nlohmann::json& body) { res.set_content(body.dump(), kJson); }

std::optional<std::string> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  auto v = req.get_param_value(key);
  if (v.empty()) return std::nullopt;
  return v;
}

}  // namespace

struct Server::Impl {
  service::Service& svc;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
  int bound_port = -1;

  Impl(service::Service& s, ServerOptions o) : svc(s), options(std::move(o)) {}

  // Wraps a handler with error mapping and the revision header.
  template <typename F>
  httplib::Server::Handler guarded(F&& f) {
    return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
        res.set_header("X-Fieldlog-Revision", std::to_string(svc.revision()));
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), e.detail());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.set_payload_max_length(service::kMaxBodyBytes);

    server.Post("/api/v1/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, service::to_json(svc.ingest(req.body)));
    }));

    server.Post("/api/v1/recompute", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, {{"revision", svc.recompute(param(req, "machine"))}});
    }));

    server.Get("/api/v1/records", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> params;
      for (const auto& [k, v] : req.params) params[k] = v;
      const auto query = service::parse_record_query(params);
      const auto format = param(req, "format").value_or("json");
      if (format != "json" && format != "csv" && format != "geojson") {
        throw Error(ErrorCode::invalid_argument, "unknown format '" + format + "'");
      }
      const auto records = svc.query_records(query);
      if (format == "csv") {
        res.set_content(io::records_to_csv(records), "text/csv");
      } else if (format == "geojson") {
        res.set_content(io::records_to_geojson(records, &svc.registry()).dump(), "application/geo+json");
      } else {
        send_json(res, io::records_to_json(records, &svc.registry()));
      }
    }));

    server.Get("/api/v1/live", guarded([this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& p : svc.live_positions()) out.push_back(service::to_json(p, svc.registry()));
      send_json(res, out);
    }));

    server.Get("/api/v1/registry", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, to_json(svc.registry()));
    }));

    server.Get("/api/v1/transit", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, io::to_json(svc.transit(param(req, "machine"))));
    }));

    server.Get("/api/v1/boundaries", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, svc.boundaries(param(req, "field")));
    }));

    server.Get("/api/v1/summary", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, io::to_json(svc.summary()));
    }));

    if (options.web_root) {
      if (!server.set_mount_point("/app", options.web_root->string())) {
        throw Error(ErrorCode::io_error, "web root " + options.web_root->string() + " is not a directory");
      }
      server.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/app/"); });
    }

    // Fill in bodies for statuses raised by the HTTP layer itself (404, 413).
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const std::string_view error = res.status == 404   ? "not_found"
                                     : res.status == 413 ? "payload_too_large"
                                                         : "http_error";
      send_error(res, res.status, error, httplib::status_message(res.status));
      return httplib::Server::HandlerResponse::Handled;
    });
  }
};

Server::Server(service::Service& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

Server::~Server() {
  stop();
}

int Server::bind() {
  const auto& o = impl_->options;
  if (o.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(o.host);
  } else if (impl_->server.bind_to_port(o.host, o.port)) {
    impl_->bound_port = o.port;
  }
  if (impl_->bound_port <= 0) {
    throw Error(ErrorCode::io_error, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return impl_->bound_port;
}

void Server::run() { impl_->server.listen_after_bind(); }

int Server::start() {
  const int p = bind();
  impl_->thread = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
  return p;
}

void Server::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Server::port() const noexcept { return impl_->bound_port; }

}  // namespace fieldlog::http
