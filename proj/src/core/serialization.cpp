#include "groundchat/core/serialization.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>

#include "groundchat/error.hpp"

namespace groundchat {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw FormatError("invalid base64 payload");
    std::size_t size = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    if (!text.empty() && text.back() == '=') --size;
    if (text.size() > 1 && text[text.size() - 2] == '=') --size;
    out.resize(size);
    return out;
}

std::vector<std::string> validate_tag(const Tag& tag) {
    std::vector<std::string> v;
    if (tag.label.empty()) v.emplace_back("label non-empty");
    if (std::any_of(tag.label.begin(), tag.label.end(), [](unsigned char c) { return std::isupper(c) != 0; })) {
        v.emplace_back("label lowercase");
    }
    if (!(tag.score >= 0.0 && tag.score <= 1.0)) v.emplace_back("score within [0,1]");
    return v;
}

namespace {

template <typename T>
T get_field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("field '") + key + "': " + e.what());
    }
}

void throw_if(const std::vector<std::string>& violations, const char* type) {
    if (violations.empty()) return;
    std::string message = std::string(type) + " invalid:";
    for (const auto& v : violations) message += " " + v + ";";
    throw FormatError(message);
}

} // namespace

void to_json(Json& j, const Tag& tag) { j = Json{{"label", tag.label}, {"score", tag.score}}; }

void from_json(const Json& j, Tag& tag) {
    tag.label = get_field<std::string>(j, "label");
    tag.score = get_field<double>(j, "score");
    throw_if(validate_tag(tag), "Tag");
}

void to_json(Json& j, const TagSet& tags) { j = tags.tags(); }

void from_json(const Json& j, TagSet& tags) {
    if (!j.is_array()) throw FormatError("TagSet must be an array");
    TagSet out;
    for (const auto& item : j) {
        if (!out.add(item.get<Tag>())) throw FormatError("TagSet has duplicate label");
    }
    tags = std::move(out);
}

void to_json(Json& j, const BoundingBox& box) {
    j = Json{{"x_min", box.x_min}, {"y_min", box.y_min}, {"x_max", box.x_max}, {"y_max", box.y_max}};
}

void from_json(const Json& j, BoundingBox& box) {
    box.x_min = get_field<double>(j, "x_min");
    box.y_min = get_field<double>(j, "y_min");
    box.x_max = get_field<double>(j, "x_max");
    box.y_max = get_field<double>(j, "y_max");
    if (!(box.x_min >= 0.0 && box.x_min < box.x_max && box.y_min >= 0.0 && box.y_min < box.y_max)) {
        throw FormatError("BoundingBox invalid: need 0 <= min < max");
    }
}

void to_json(Json& j, const SegmentMask& mask) {
    j = Json{{"width", mask.width()}, {"height", mask.height()}, {"rle", mask.runs()}};
}

void from_json(const Json& j, SegmentMask& mask) {
    mask = SegmentMask::from_runs(get_field<int>(j, "width"), get_field<int>(j, "height"),
                                  get_field<std::vector<std::uint32_t>>(j, "rle"));
}

void to_json(Json& j, const GroundedEntity& e) {
    j = Json{{"label", e.label}, {"box", e.box}, {"detector_score", e.detector_score}};
    j["mask"] = e.mask ? Json(*e.mask) : Json(nullptr);
}

void from_json(const Json& j, GroundedEntity& e) {
    e.label = get_field<std::string>(j, "label");
    e.box = get_field<BoundingBox>(j, "box");
    e.detector_score = get_field<double>(j, "detector_score");
    e.mask.reset();
    if (j.contains("mask") && !j.at("mask").is_null()) e.mask = j.at("mask").get<SegmentMask>();
    if (!(e.detector_score >= 0.0 && e.detector_score <= 1.0)) throw FormatError("detector_score outside [0,1]");
}

void to_json(Json& j, const EntityMatch& m) {
    j = Json{{"entity_index", m.entity_index}, {"span", {m.start, m.end}}, {"surface", m.surface}};
}

void from_json(const Json& j, EntityMatch& m) {
    m.entity_index = get_field<std::size_t>(j, "entity_index");
    const auto span = get_field<std::vector<std::size_t>>(j, "span");
    if (span.size() != 2 || span[0] >= span[1]) throw FormatError("EntityMatch span must be [start, end) with start < end");
    m.start = span[0];
    m.end = span[1];
    m.surface = get_field<std::string>(j, "surface");
    if (m.surface.size() != m.end - m.start) throw FormatError("EntityMatch surface length disagrees with span");
}

void to_json(Json& j, const MediaRef& ref) {
    j = Json{{"kind", to_string(ref.kind)}, {"format", to_string(ref.format)}, {"digest", ref.digest}};
}

void from_json(const Json& j, MediaRef& ref) {
    ref.kind = parse_modality_kind(get_field<std::string>(j, "kind"));
    ref.format = parse_media_format(get_field<std::string>(j, "format"));
    ref.digest = get_field<std::string>(j, "digest");
    if (!format_matches_kind(ref.format, ref.kind)) throw FormatError("media format inconsistent with kind");
}

void to_json(Json& j, const InstructionSample& s) {
    j = Json{{"image", s.image ? Json(*s.image) : Json(nullptr)},
             {"audio", s.audio ? Json(*s.audio) : Json(nullptr)},
             {"instruction", s.instruction},
             {"response", s.response},
             {"related", s.related}};
}

void from_json(const Json& j, InstructionSample& s) {
    s.image.reset();
    s.audio.reset();
    if (j.contains("image") && !j.at("image").is_null()) s.image = j.at("image").get<MediaRef>();
    if (j.contains("audio") && !j.at("audio").is_null()) s.audio = j.at("audio").get<MediaRef>();
    s.instruction = get_field<std::string>(j, "instruction");
    s.response = get_field<std::string>(j, "response");
    s.related = get_field<bool>(j, "related");
}

void to_json(Json& j, const ChatTurn& t) {
    j = Json{{"role", to_string(t.role)}, {"text", t.text}, {"attachments", t.attachments}};
}

void from_json(const Json& j, ChatTurn& t) {
    t.role = parse_role(get_field<std::string>(j, "role"));
    t.text = get_field<std::string>(j, "text");
    t.attachments = j.contains("attachments") ? j.at("attachments").get<std::vector<MediaRef>>()
                                              : std::vector<MediaRef>{};
    throw_if(validate_turn(t), "ChatTurn");
}

Json modality_input_to_json(const ModalityInput& input) {
    return Json{{"kind", to_string(input.kind())},
                {"format", to_string(input.format())},
                {"digest", input.digest()},
                {"payload", base64_encode(input.payload())}};
}

ModalityInput modality_input_from_json(const Json& j) {
    ModalityInput input(parse_modality_kind(get_field<std::string>(j, "kind")),
                        parse_media_format(get_field<std::string>(j, "format")),
                        base64_decode(get_field<std::string>(j, "payload")));
    if (j.contains("digest") && j.at("digest").get<std::string>() != input.digest()) {
        throw FormatError("ModalityInput digest does not match payload");
    }
    return input;
}

} // namespace groundchat
