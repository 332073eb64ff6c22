#pragma once

#include <memory>
#include <string>

#include "groundchat/service/chat.hpp"

namespace groundchat::service {

/// /v1 HTTP front end over a ChatService:
///   POST /v1/sessions
///   POST /v1/sessions/{id}/messages   multipart: text, image?, audio?
///   GET  /v1/sessions/{id}
///   GET  /v1/sessions/{id}/masks/{mask_id}
///   GET  /v1/health
class HttpServer {
  public:
    explicit HttpServer(ChatService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds without serving; false when the address is taken. Port 0
    /// picks a free port.
    bool bind(const std::string& host, int port);
    int port() const;
    /// Blocks until stop().
    void serve();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace groundchat::service
