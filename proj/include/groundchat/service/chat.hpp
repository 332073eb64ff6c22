#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundchat/core/types.hpp"
#include "groundchat/error.hpp"
#include "groundchat/grounding/pipeline.hpp"
#include "groundchat/model/stack.hpp"

namespace groundchat::service {

using Json = nlohmann::json;

struct ServiceConfig {
    std::size_t max_upload_bytes = 20u * 1024u * 1024u;
    bool allow_text_only = false;
    std::uint64_t seed = 0;
    std::size_t max_new_tokens = 64;
    double temperature = 0.0;
    grounding::GroundingConfig grounding;
    std::optional<std::filesystem::path> persistence_dir;
};

/// Error carrying the HTTP status it maps to.
class ServiceError : public Error {
  public:
    ServiceError(int status, ErrorKind kind, std::string message, std::string stage = {})
        : Error(kind, std::move(message), std::move(stage)), status_(status) {}
    int status() const noexcept { return status_; }

  private:
    int status_;
};

/// 404 not_found, 413 overflow, 422 input, 503 adapter, 400 otherwise.
int http_status(const Error& error);
/// Wire form {code, message, stage, schema_version}.
Json error_json(const Error& error);

struct Upload {
    std::vector<std::uint8_t> bytes;
    std::string filename;
};

struct MessageRequest {
    std::string text;
    std::optional<Upload> image;
    std::optional<Upload> audio;
};

struct Reply {
    std::size_t turn_index = 0; // index of the assistant turn
    std::string text;
    std::optional<grounding::GroundingResult> grounding;
    std::optional<Json> grounding_error; // set when grounding adapters failed
    std::optional<bool> related_verdict; // set when the turn carried both modalities
    std::vector<std::string> mask_ids;
};

Json reply_json(const std::string& session_id, const Reply& reply);

struct SessionSnapshot {
    std::string id;
    std::vector<ChatTurn> turns;
    std::vector<MediaRef> attachments;
    std::map<std::size_t, grounding::GroundingResult> groundings; // by assistant turn index
    std::int64_t created_ms = 0;
    std::int64_t updated_ms = 0;
};

Json session_json(const SessionSnapshot& session);

/// Everything the service needs to answer: a model whose LLM is either a
/// trained toy decoder or a canned-reply adapter, and grounding adapters.
struct Backend {
    std::shared_ptr<const model::MultimodalModel> model;
    grounding::GroundingAdapters grounding;
};

class ChatService {
  public:
    ChatService(Backend backend, ServiceConfig config);
    ~ChatService();

    ChatService(const ChatService&) = delete;
    ChatService& operator=(const ChatService&) = delete;

    SessionSnapshot create_session();
    /// Throws NotFoundError for unknown ids.
    SessionSnapshot get_session(const std::string& id) const;
    std::size_t session_count() const;

    /// Appends one human and one assistant turn, or nothing on failure.
    Reply post_message(const std::string& session_id, const MessageRequest& request);

    /// 1-bit PNG of a mask id "t<turn>-e<entity>".
    std::vector<std::uint8_t> get_mask(const std::string& session_id, const std::string& mask_id) const;

    /// Writes every session when persistence is enabled.
    void flush() const;

    const ServiceConfig& config() const { return config_; }
    const Backend& backend() const { return backend_; }

  private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    void persist(const Session& session) const;
    void load_persisted();
    std::string next_id();

    Backend backend_;
    ServiceConfig config_;
    mutable std::mutex mutex_; // guards sessions_ and rng_
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mt19937_64 rng_;
};

/// Judges a two-modality reply: describing image and audio separately
/// ("The image ... The audio ...") or saying they are unrelated means false.
bool related_verdict_from_reply(std::string_view reply);

} // namespace groundchat::service
