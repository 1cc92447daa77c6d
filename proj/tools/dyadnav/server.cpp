#include "server.hpp"

#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace dyadnav {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

nlohmann::ordered_json error_body(const std::string& message) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["message"] = message;
  return j;
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return static_cast<std::size_t>(std::stoull(req.get_param_value(key)));
  } catch (const std::exception&) {
    return fallback;
  }
}

}  // namespace

struct SessionServer::Impl {
  ServeOptions opts;
  dyad::SessionManager sessions;
  httplib::Server http;
  int port = -1;

  explicit Impl(ServeOptions o) : opts(std::move(o)) { routes(); }

  void routes() {
    http.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = nlohmann::json::object();
      if (!req.body.empty()) {
        body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) return send_json(res, 400, error_body("request body is not valid JSON"));
      }
      try {
        const dyad::SessionConfig cfg = dyad::session_config_from_json(body, opts.defaults);
        auto opened = sessions.open(cfg);
        nlohmann::ordered_json j;
        j["type"] = "opened";
        j["id"] = opened.id;
        j["step"] = opened.state["step"];
        j["state"] = std::move(opened.state);
        send_json(res, 201, j);
      } catch (const std::exception& e) {
        send_json(res, 400, error_body(e.what()));
      }
    });

    http.Post(R"(/api/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto msg = nlohmann::json::parse(req.body, nullptr, false);
      if (msg.is_discarded()) return send_json(res, 400, error_body("message is not valid JSON"));
      const auto reply = sessions.send(req.matches[1], msg);
      if (!reply) return send_json(res, 404, error_body("no such session"));
      send_json(res, (*reply)["type"] == "error" ? 400 : 200, *reply);
    });

    http.Get(R"(/api/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto state = sessions.latest(req.matches[1]);
      if (!state) return send_json(res, 404, error_body("no such session"));
      send_json(res, 200, *state);
    });

    http.Get(R"(/api/sessions/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto trace = sessions.trace_jsonl(req.matches[1]);
      if (!trace) return send_json(res, 404, error_body("no such session"));
      res.set_content(*trace, "application/x-ndjson");
    });

    http.Get(R"(/api/sessions/([^/]+)/poll)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::size_t from = query_size(req, "from", 0);
      const int wait_ms = static_cast<int>(std::min<std::size_t>(query_size(req, "wait_ms", 0), 30000));
      const auto events = sessions.events(req.matches[1], from, wait_ms);
      if (!events) return send_json(res, 404, error_body("no such session"));
      std::string body = "[";
      for (std::size_t i = 0; i < events->size(); ++i) body += (i ? "," : "") + (*events)[i];
      body += "]";
      res.set_content(body, "application/json");
    });

    http.Get(R"(/api/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!sessions.exists(id)) return send_json(res, 404, error_body("no such session"));
      auto next = std::make_shared<std::size_t>(query_size(req, "from", 0));
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, id, next](std::size_t, httplib::DataSink& sink) {
        const auto events = sessions.events(id, *next, 500);
        if (!events) {
          sink.done();
          return true;
        }
        for (const auto& e : *events) {
          const std::string frame = "id: " + std::to_string(*next) + "\ndata: " + e + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
          ++*next;
        }
        if (events->empty()) {
          static const std::string keepalive = ": keepalive\n\n";
          if (!sink.write(keepalive.data(), keepalive.size())) return false;
        }
        return true;
      });
    });

    http.Delete(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      if (!sessions.close(req.matches[1])) return send_json(res, 404, error_body("no such session"));
      nlohmann::ordered_json j;
      j["type"] = "closed";
      j["id"] = std::string(req.matches[1]);
      send_json(res, 200, j);
    });

    if (!opts.static_dir.empty() && !http.set_mount_point("/", opts.static_dir))
      throw std::runtime_error("static directory not found: " + opts.static_dir);
  }
};

SessionServer::SessionServer(ServeOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind() {
  auto& i = *impl_;
  if (i.opts.port == 0)
    i.port = i.http.bind_to_any_port(i.opts.host);
  else
    i.port = i.http.bind_to_port(i.opts.host, i.opts.port) ? i.opts.port : -1;
  if (i.port < 0)
    throw std::runtime_error("cannot bind " + i.opts.host + ":" + std::to_string(i.opts.port));
  return i.port;
}

void SessionServer::listen() {
  if (impl_->port < 0) bind();
  impl_->http.listen_after_bind();
}

void SessionServer::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

dyad::SessionManager& SessionServer::sessions() { return impl_->sessions; }

}  // namespace dyadnav
