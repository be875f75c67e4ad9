// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "stagecraft/errors.hpp"
#include "stagecraft/service.hpp"

namespace stagecraft {
namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", kJson);
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send_json(res, status, {{"error", kind}, {"message", message}});
}

// Maps pipeline exceptions onto HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const NotFound& ex) {
        send_error(res, 404, ex.kind(), ex.what());
    } catch (const TurnInFlight& ex) {
        send_error(res, 409, ex.kind(), ex.what());
    } catch (const DesignFailure& ex) {
        nlohmann::ordered_json body{{"error", ex.kind()}, {"message", ex.what()}, {"transcripts", ex.transcripts()}};
        send_json(res, 422, body);
    } catch (const ConfigError& ex) {
        send_error(res, 400, ex.kind(), ex.what());
    } catch (const nlohmann::json::exception& ex) {
        send_error(res, 400, "bad_request", ex.what());
    } catch (const Error& ex) {
        spdlog::error("request failed: {}", ex.what());
        send_error(res, 500, ex.kind(), ex.what());
    } catch (const std::exception& ex) {
        spdlog::error("request failed: {}", ex.what());
        send_error(res, 500, "internal", ex.what());
    }
}

nlohmann::json body_object(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ConfigError("request body must be a JSON object");
    return j;
}

}  // namespace

struct HttpApi::Impl {
    SessionService& service;
    httplib::Server server;

    explicit Impl(SessionService& s) : service(s) {
        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_object(req);
                SessionSettings settings;
                if (body.contains("seed")) settings.seed = body.at("seed").get<std::uint64_t>();
                if (body.contains("config")) {
                    const auto& cfg = body.at("config");
                    if (cfg.contains("steps")) settings.steps = cfg.at("steps").get<int>();
                    if (cfg.contains("ratio")) settings.ratio = cfg.at("ratio").get<double>();
                }
                send_json(res, 201, {{"session_id", service.create_session(settings)}});
            });
        });
        server.Post(R"(/sessions/([A-Za-z0-9_-]+)/turns)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                service.session(id);  // 404 before the body is looked at
                const auto body = body_object(req);
                if (!body.contains("instruction") || !body.at("instruction").is_string()) {
                    throw ConfigError("request body needs a string 'instruction'");
                }
                const TurnRecord record = service.submit_turn(id, body.at("instruction").get<std::string>());
                send_json(res, 200, SessionService::turn_response(record));
            });
        });
        server.Get(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                res.status = 200;
                res.set_content(dump_canonical(session_to_json(service.session(req.matches[1]))), kJson);
            });
        });
        server.Delete(R"(/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                service.delete_session(req.matches[1]);
                res.status = 204;
            });
        });
        server.Get(R"(/images/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto bytes = service.image(req.matches[1]);
                if (!bytes) throw NotFound("unknown image '" + std::string(req.matches[1]) + "'");
                res.status = 200;
                res.set_content(std::string(bytes->begin(), bytes->end()), "image/png");
            });
        });
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) send_error(res, res.status, "http_error", httplib::status_message(res.status));
        });
    }
};

HttpApi::HttpApi(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpApi::listen_after_bind() { return impl_->server.listen_after_bind(); }
void HttpApi::stop() { impl_->server.stop(); }
void HttpApi::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace stagecraft
