// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <httplib.h>

#include "trajaudit/review/review.hpp"
#include "trajaudit/verifier/prompt.hpp"

namespace trajaudit::review {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  // When non-empty, every request must carry it in the X-Review-Token header.
  std::string access_token;
};

inline int http_status(const Error& e) {
  const std::string& c = e.code();
  if (c == "UnknownReviewSet" || c == "UnknownSample") return 404;
  if (c == "DuplicateVerdict" || c == "EmptySet") return 409;
  if (c == "InsufficientSamples") return 422;
  if (c == "SchemaError" || c == "InvariantError") return 400;
  return 500;
}

// JSON API over a ReviewStore:
//   POST /review-sets                     {"per_domain", "seed"}
//   GET  /review-sets/{id}
//   GET  /review-sets/{id}/next?annotator=
//   POST /verdicts                        HumanVerdict object
//   GET  /review-sets/{id}/stats
// Errors are {"code", "message"}.
class ReviewServer {
public:
  ReviewServer(ReviewStore& store, ServerConfig config) : store_(store), config_(std::move(config)) { routes(); }

  ~ReviewServer() { stop(); }

  // Binds and serves on a background thread; returns the bound port.
  int start() {
    bind();
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Serves on the calling thread until stop() is called elsewhere.
  bool serve() {
    bind();
    return server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

private:
  void bind() {
    if (config_.port == 0) {
      port_ = server_.bind_to_any_port(config_.host);
    } else {
      port_ = server_.bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) throw Error("IoError", "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }

  static void reply(httplib::Response& res, int status, const ojson& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    reply(res, status, ojson{{"code", code}, {"message", message}});
  }

  template <typename F>
  httplib::Server::Handler guarded(F body) {
    return [this, body](const httplib::Request& req, httplib::Response& res) {
      if (!config_.access_token.empty() && req.get_header_value("X-Review-Token") != config_.access_token) {
        fail(res, 401, "Unauthorized", "missing or wrong X-Review-Token");
        return;
      }
      try {
        body(req, res);
      } catch (const Error& e) {
        fail(res, http_status(e), e.code(), e.what());
      } catch (const json::exception& e) {
        fail(res, 400, "SchemaError", e.what());
      }
    };
  }

  static json parse_body(const httplib::Request& req) {
    const json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError("request body must be a JSON object");
    return j;
  }

  ojson sample_view(const ReviewSet& set, const std::string& id, const std::string& annotator) const {
    const LabeledTrajectory& item = store_.sample(id);
    std::size_t position = 0;
    while (set.sample_ids[position] != id) ++position;
    ojson o = ojson::object();
    o["set_id"] = set.id;
    o["annotator"] = annotator;
    o["sample_id"] = id;
    o["position"] = position + 1;
    o["total"] = set.sample_ids.size();
    o["trajectory"] = trajectory_fields_json(item.trajectory);
    o["label"] = label_to_json(item.label);
    o["rendered"] = verifier::build_audit_prompt(item.trajectory, verifier::default_template()).rendered_trajectory;
    return o;
  }

  void routes() {
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, ojson{{"ok", true}}); });

    server_.Post("/review-sets", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json j = parse_body(req);
      if (!j.contains("per_domain") || !j["per_domain"].is_number_integer()) throw SchemaError("per_domain must be an integer");
      if (!j.contains("seed") || !j["seed"].is_number_unsigned()) throw SchemaError("seed must be a non-negative integer");
      reply(res, 201, set_to_json(store_.create_set(j["per_domain"].get<int>(), j["seed"].get<std::uint64_t>())));
    }));

    server_.Get(R"(/review-sets/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, set_to_json(store_.get_set(req.matches[1])));
    }));

    server_.Get(R"(/review-sets/([^/]+)/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) throw SchemaError("annotator query parameter is required");
      const ReviewSet set = store_.get_set(req.matches[1]);
      const auto next = store_.next_sample(set.id, annotator);
      if (!next) {
        reply(res, 200, ojson{{"set_id", set.id}, {"annotator", annotator}, {"done", true}});
        return;
      }
      ojson view = sample_view(set, *next, annotator);
      view["done"] = false;
      reply(res, 200, view);
    }));

    server_.Post("/verdicts", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 201, verdict_to_json(store_.record_verdict(verdict_from_json(parse_body(req)))));
    }));

    server_.Get(R"(/review-sets/([^/]+)/stats)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      ojson body = stats_to_json(store_.stats(req.matches[1]));
      body["set_id"] = std::string(req.matches[1]);
      reply(res, 200, body);
    }));
  }

  ReviewStore& store_;
  ServerConfig config_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

} // namespace trajaudit::review
