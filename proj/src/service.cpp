#include "sherlock/service.hpp"

#include "httplib.h"
#include "json.hpp"
#include "sherlock/errors.hpp"

namespace sherlock {

using nlohmann::json;

namespace {

HttpReply error_reply(int status, const std::string& reason) {
  return {status, json{{"error", reason}}.dump()};
}

}  // namespace

ScanService::ScanService(std::shared_ptr<const SavedModel> model, ServiceOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (!model_) throw ConfigError("scan service started without a model");
}

HttpReply ScanService::scan(std::string_view body) const {
  if (body.size() > options_.max_body_bytes) {
    return error_reply(413, "request body exceeds " + std::to_string(options_.max_body_bytes) +
                                " bytes");
  }
  json request;
  try {
    request = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_reply(400, std::string("malformed JSON: ") + e.what());
  }
  if (!request.is_object()) return error_reply(400, "request must be a JSON object");
  const auto code = request.find("code");
  if (code == request.end() || !code->is_string()) {
    return error_reply(400, "request needs a string field 'code'");
  }

  const auto result = predict(model_->model, code->get_ref<const std::string&>(), model_->vocab);
  nlohmann::ordered_json response;
  auto& probs = response["probabilities"];
  probs = nlohmann::ordered_json::object();
  for (std::size_t h = 0; h < kHeadCount; ++h) probs[std::string(kHeadNames[h])] = result.vulnerable[h];
  response["token_count"] = result.token_count;
  response["model_format_version"] = kModelFormatVersion;
  return {200, response.dump()};
}

HttpReply ScanService::health() const {
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["model_format_version"] = kModelFormatVersion;
  j["vocab_size"] = model_->vocab.size();
  j["max_len"] = model_->model.hp.max_len;
  return {200, j.dump()};
}

struct ScanServer::Impl {
  std::shared_ptr<const ScanService> service;
  httplib::Server server;
};

ScanServer::ScanServer(std::shared_ptr<const ScanService> service)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  auto& srv = impl_->server;
  const auto svc = impl_->service;
  const auto origin = svc->options().allowed_origin;

  srv.set_payload_max_length(svc->options().max_body_bytes);
  srv.set_default_headers({{"Access-Control-Allow-Origin", origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});

  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  };
  srv.Get("/health", [svc, send](const httplib::Request&, httplib::Response& res) {
    send(res, svc->health());
  });
  srv.Post("/scan", [svc, send](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->scan(req.body));
  });
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.set_exception_handler([send](const httplib::Request&, httplib::Response& res,
                                   std::exception_ptr ep) {
    std::string reason = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reason = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, reason));
  });
  // httplib answers oversize bodies itself; give them the same JSON shape.
  srv.set_error_handler([svc, send](const httplib::Request&, httplib::Response& res) {
    if (res.status == 413) {
      send(res, error_reply(413, "request body exceeds " +
                                     std::to_string(svc->options().max_body_bytes) + " bytes"));
    } else if (res.body.empty()) {
      send(res, error_reply(res.status, httplib::status_message(res.status)));
    }
  });
}

ScanServer::~ScanServer() = default;

int ScanServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ScanServer::listen() { return impl_->server.listen_after_bind(); }

void ScanServer::stop() { impl_->server.stop(); }

void ScanServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace sherlock
