#include "groundchat/service/chat.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "groundchat/core/serialization.hpp"
#include "groundchat/media/audio.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/prompting/prompt.hpp"

namespace groundchat::service {

namespace fs = std::filesystem;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

ModalityInput accept_upload(ModalityKind kind, const Upload& upload, std::size_t cap) {
    if (upload.bytes.size() > cap) {
        throw ServiceError(413, ErrorKind::overflow,
                           std::string(to_string(kind)) + " upload of " + std::to_string(upload.bytes.size()) +
                               " bytes exceeds the " + std::to_string(cap) + " byte limit",
                           "upload");
    }
    try {
        ModalityInput input = ModalityInput::from_bytes(kind, upload.bytes);
        if (kind == ModalityKind::image) (void)media::decode_image(input);
        else (void)media::decode_audio(input);
        return input;
    } catch (const InputError& e) {
        throw InputError(e.what(), "upload");
    }
}

std::pair<std::size_t, std::size_t> parse_mask_id(const std::string& id) {
    unsigned long turn = 0;
    unsigned long entity = 0;
    char tail = 0;
    if (std::sscanf(id.c_str(), "t%lu-e%lu%c", &turn, &entity, &tail) != 2) {
        throw NotFoundError("unknown mask id " + id, "mask");
    }
    return {turn, entity};
}

} // namespace

struct ChatService::Session {
    mutable std::mutex mutex; // one in-flight message per session
    SessionSnapshot data;
    std::map<std::string, ModalityInput> media;
};

int http_status(const Error& error) {
    if (const auto* s = dynamic_cast<const ServiceError*>(&error)) return s->status();
    switch (error.kind()) {
    case ErrorKind::not_found: return 404;
    case ErrorKind::overflow: return 413;
    case ErrorKind::input: return 422;
    case ErrorKind::adapter: return 503;
    default: return 400;
    }
}

Json error_json(const Error& error) {
    return {{"schema_version", kSchemaVersion},
            {"code", to_string(error.kind())},
            {"message", error.what()},
            {"stage", error.stage()}};
}

bool related_verdict_from_reply(std::string_view reply) {
    const std::string text = lower(reply);
    if (text.find("not related") != std::string::npos || text.find("unrelated") != std::string::npos) return false;
    const auto image = text.find("the image");
    const auto audio = text.find("the audio");
    return !(image != std::string::npos && audio != std::string::npos && image < audio);
}

Json reply_json(const std::string& session_id, const Reply& r) {
    Json j = {{"schema_version", kSchemaVersion},
              {"session_id", session_id},
              {"turn_index", r.turn_index},
              {"text", r.text},
              {"mask_ids", r.mask_ids}};
    j["grounding"] = r.grounding ? grounding::to_json(*r.grounding) : Json(nullptr);
    j["grounding_error"] = r.grounding_error ? *r.grounding_error : Json(nullptr);
    j["related_verdict"] = r.related_verdict ? Json(*r.related_verdict) : Json(nullptr);
    return j;
}

Json session_json(const SessionSnapshot& s) {
    Json groundings = Json::array();
    for (const auto& [turn, result] : s.groundings) {
        groundings.push_back({{"turn_index", turn}, {"result", grounding::to_json(result)}});
    }
    return {{"schema_version", kSchemaVersion}, {"id", s.id},
            {"created_ms", s.created_ms},       {"updated_ms", s.updated_ms},
            {"turns", s.turns},                 {"attachments", s.attachments},
            {"groundings", groundings}};
}

ChatService::ChatService(Backend backend, ServiceConfig config)
    : backend_(std::move(backend)), config_(std::move(config)), rng_(config_.seed) {
    if (!backend_.model) throw ConfigError("service needs a model", "service");
    grounding::validate(config_.grounding);
    if (config_.max_upload_bytes == 0) throw ConfigError("max_upload_bytes must be positive", "service");
    if (config_.persistence_dir) {
        fs::create_directories(*config_.persistence_dir);
        load_persisted();
    }
}

ChatService::~ChatService() = default;

std::string ChatService::next_id() {
    for (;;) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(rng_()));
        if (!sessions_.contains(buf)) return buf;
    }
}

SessionSnapshot ChatService::create_session() {
    auto session = std::make_shared<Session>();
    {
        std::lock_guard lock(mutex_);
        session->data.id = next_id();
        session->data.created_ms = session->data.updated_ms = now_ms();
        sessions_.emplace(session->data.id, session);
    }
    persist(*session);
    return session->data;
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session " + id, "session");
    return it->second;
}

SessionSnapshot ChatService::get_session(const std::string& id) const {
    const auto session = find(id);
    std::lock_guard lock(session->mutex);
    return session->data;
}

std::size_t ChatService::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

Reply ChatService::post_message(const std::string& session_id, const MessageRequest& request) {
    const auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    auto& data = session->data;

    if (request.text.empty()) throw PreconditionError("message text must be non-empty", "prompting");
    std::optional<ModalityInput> image;
    std::optional<ModalityInput> audio;
    if (request.image) image = accept_upload(ModalityKind::image, *request.image, config_.max_upload_bytes);
    if (request.audio) audio = accept_upload(ModalityKind::audio, *request.audio, config_.max_upload_bytes);

    prompting::ChatPromptOptions options;
    options.allow_text_only = config_.allow_text_only;
    if (image) options.image_digest = image->digest();
    if (audio) options.audio_digest = audio->digest();
    const auto prompt =
        prompting::build_chat_prompt(data.turns, request.text, image.has_value(), audio.has_value(), options);

    std::map<std::string, ModalityInput> inputs;
    for (const auto& slot : prompt.slots()) {
        if (image && slot.source_digest == image->digest() && slot.kind == ModalityKind::image) {
            inputs.emplace(slot.slot_id, *image);
        } else if (audio && slot.source_digest == audio->digest() && slot.kind == ModalityKind::audio) {
            inputs.emplace(slot.slot_id, *audio);
        } else if (const auto it = session->media.find(slot.source_digest); it != session->media.end()) {
            inputs.emplace(slot.slot_id, it->second);
        } else {
            throw PreconditionError("attachment for " + slot.slot_id + " is missing from the session", "session");
        }
    }

    model::GenerationConfig gen;
    gen.max_new_tokens = config_.max_new_tokens;
    gen.temperature = config_.temperature;
    gen.seed = config_.seed;
    Reply reply;
    reply.text = model::respond(*backend_.model, prompt, inputs, gen);

    // Grounding scope: this turn's image, else the session's latest one.
    const ModalityInput* scope = image ? &*image : nullptr;
    if (!scope) {
        for (auto it = data.turns.rbegin(); it != data.turns.rend() && !scope; ++it) {
            for (const auto& ref : it->attachments) {
                if (ref.kind == ModalityKind::image) {
                    scope = &session->media.at(ref.digest);
                    break;
                }
            }
        }
    }
    if (scope) {
        try {
            std::optional<std::string_view> text;
            if (!reply.text.empty()) text = reply.text;
            reply.grounding = grounding::run_pipeline(*scope, text, backend_.grounding, config_.grounding);
        } catch (const Error& e) {
            Json err = error_json(e);
            err["status"] = http_status(e);
            reply.grounding_error = err;
        }
    }
    if (image && audio) reply.related_verdict = related_verdict_from_reply(reply.text);

    ChatTurn human{Role::human, request.text, {}};
    if (image) human.attachments.push_back(MediaRef::of(*image));
    if (audio) human.attachments.push_back(MediaRef::of(*audio));
    reply.turn_index = data.turns.size() + 1;
    if (reply.grounding) {
        for (std::size_t e = 0; e < reply.grounding->entities.size(); ++e) {
            if (reply.grounding->entities[e].mask) {
                reply.mask_ids.push_back("t" + std::to_string(reply.turn_index) + "-e" + std::to_string(e));
            }
        }
    }

    data.turns.push_back(std::move(human));
    data.turns.push_back({Role::assistant, reply.text, {}});
    if (image) session->media.emplace(image->digest(), *image);
    if (audio) session->media.emplace(audio->digest(), *audio);
    for (const auto& ref : data.turns[data.turns.size() - 2].attachments) {
        if (std::find(data.attachments.begin(), data.attachments.end(), ref) == data.attachments.end()) {
            data.attachments.push_back(ref);
        }
    }
    if (reply.grounding) data.groundings[reply.turn_index] = *reply.grounding;
    data.updated_ms = now_ms();
    persist(*session);
    return reply;
}

std::vector<std::uint8_t> ChatService::get_mask(const std::string& session_id, const std::string& mask_id) const {
    const auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    const auto [turn, entity] = parse_mask_id(mask_id);
    const auto it = session->data.groundings.find(turn);
    if (it == session->data.groundings.end() || entity >= it->second.entities.size() ||
        !it->second.entities[entity].mask) {
        throw NotFoundError("unknown mask id " + mask_id, "mask");
    }
    return media::encode_mask_png(*it->second.entities[entity].mask);
}

void ChatService::persist(const Session& session) const {
    if (!config_.persistence_dir) return;
    Json j = session_json(session.data);
    Json media = Json::array();
    for (const auto& [digest, input] : session.media) media.push_back(modality_input_to_json(input));
    j["media"] = std::move(media);
    const fs::path path = *config_.persistence_dir / (session.data.id + ".json");
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump() << '\n';
        if (!out) throw InputError("cannot write session file " + tmp.string(), "persistence");
    }
    fs::rename(tmp, path);
}

void ChatService::flush() const {
    if (!config_.persistence_dir) return;
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, s] : sessions_) all.push_back(s);
    }
    for (const auto& s : all) {
        std::lock_guard lock(s->mutex);
        persist(*s);
    }
}

void ChatService::load_persisted() {
    for (const auto& entry : fs::directory_iterator(*config_.persistence_dir)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        Json j;
        try {
            j = Json::parse(in);
            auto s = std::make_shared<Session>();
            s->data.id = j.at("id").get<std::string>();
            s->data.created_ms = j.at("created_ms").get<std::int64_t>();
            s->data.updated_ms = j.at("updated_ms").get<std::int64_t>();
            s->data.turns = j.at("turns").get<std::vector<ChatTurn>>();
            s->data.attachments = j.at("attachments").get<std::vector<MediaRef>>();
            for (const auto& g : j.at("groundings")) {
                s->data.groundings[g.at("turn_index").get<std::size_t>()] = grounding::result_from_json(g.at("result"));
            }
            for (const auto& m : j.value("media", Json::array())) {
                auto input = modality_input_from_json(m);
                s->media.emplace(input.digest(), std::move(input));
            }
            sessions_.emplace(s->data.id, std::move(s));
        } catch (const std::exception& e) {
            throw FormatError("corrupt session file " + entry.path().string() + ": " + e.what(), "persistence");
        }
    }
}

} // namespace groundchat::service
