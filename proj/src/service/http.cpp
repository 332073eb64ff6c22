#include "groundchat/service/http.hpp"

#include <httplib.h>

#include "groundchat/core/serialization.hpp"

namespace groundchat::service {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_json(res, http_status(e), error_json(e));
    } catch (const std::exception& e) {
        send_json(res, 500, {{"schema_version", kSchemaVersion}, {"code", "internal"}, {"message", e.what()}, {"stage", ""}});
    }
}

std::optional<Upload> file_part(const httplib::Request& req, const char* name) {
    if (!req.has_file(name)) return std::nullopt;
    const auto part = req.get_file_value(name);
    return Upload{std::vector<std::uint8_t>(part.content.begin(), part.content.end()), part.filename};
}

MessageRequest parse_message(const httplib::Request& req) {
    MessageRequest m;
    if (req.is_multipart_form_data()) {
        if (req.has_file("text")) m.text = req.get_file_value("text").content;
        m.image = file_part(req, "image");
        m.audio = file_part(req, "audio");
        return m;
    }
    const auto type = req.get_header_value("Content-Type");
    if (type.find("application/json") != std::string::npos) {
        try {
            const Json body = Json::parse(req.body);
            m.text = body.value("text", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("malformed JSON body: ") + e.what(), "request");
        }
        return m;
    }
    if (req.has_param("text")) {
        m.text = req.get_param_value("text");
        return m;
    }
    throw InputError("expected a multipart form with a text field", "request");
}

} // namespace

struct HttpServer::Impl {
    ChatService& service;
    httplib::Server server;
    int port = -1;

    explicit Impl(ChatService& s) : service(s) {
        // Leave headroom so oversize uploads reach the service and get its 413.
        server.set_payload_max_length(service.config().max_upload_bytes * 3 + (1u << 20));
        server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200,
                      {{"schema_version", kSchemaVersion},
                       {"status", "ok"},
                       {"llm", service.backend().model->llm().name()},
                       {"sessions", service.session_count()}});
        });
        server.Post("/v1/sessions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 201, session_json(service.create_session())); });
        });
        server.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, session_json(service.get_session(req.matches[1]))); });
        });
        server.Post(R"(/v1/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                (void)service.get_session(id);
                const auto reply = service.post_message(id, parse_message(req));
                send_json(res, 200, reply_json(id, reply));
            });
        });
        server.Get(R"(/v1/sessions/([^/]+)/masks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto png = service.get_mask(req.matches[1], req.matches[2]);
                res.status = 200;
                res.set_content(std::string(png.begin(), png.end()), "image/png");
            });
        });
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            const char* code = res.status == 404 ? "not_found" : res.status == 413 ? "overflow" : "http";
            send_json(res, res.status,
                      {{"schema_version", kSchemaVersion}, {"code", code}, {"message", "request failed"}, {"stage", "http"}});
        });
    }
};

HttpServer::HttpServer(ChatService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

bool HttpServer::bind(const std::string& host, int port) {
    // The default options add SO_REUSEPORT, which would let a second server share a busy port.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
        return impl_->port > 0;
    }
    if (!impl_->server.bind_to_port(host, port)) return false;
    impl_->port = port;
    return true;
}

int HttpServer::port() const { return impl_->port; }
void HttpServer::serve() { impl_->server.listen_after_bind(); }
void HttpServer::stop() { impl_->server.stop(); }

} // namespace groundchat::service
