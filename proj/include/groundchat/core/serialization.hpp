#pragma once

// nlohmann::json encodings for the shared domain types. Decoding validates
// type invariants and throws FormatError on violation.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "groundchat/core/types.hpp"

namespace groundchat {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

void to_json(Json& j, const Tag& tag);
void from_json(const Json& j, Tag& tag);
void to_json(Json& j, const TagSet& tags);
void from_json(const Json& j, TagSet& tags);
void to_json(Json& j, const BoundingBox& box);
void from_json(const Json& j, BoundingBox& box);
void to_json(Json& j, const SegmentMask& mask);
void from_json(const Json& j, SegmentMask& mask);
void to_json(Json& j, const GroundedEntity& entity);
void from_json(const Json& j, GroundedEntity& entity);
void to_json(Json& j, const EntityMatch& match);
void from_json(const Json& j, EntityMatch& match);
void to_json(Json& j, const MediaRef& ref);
void from_json(const Json& j, MediaRef& ref);
void to_json(Json& j, const InstructionSample& sample);
void from_json(const Json& j, InstructionSample& sample);
void to_json(Json& j, const ChatTurn& turn);
void from_json(const Json& j, ChatTurn& turn);

// ModalityInput has no default constructor, so it gets explicit helpers.
Json modality_input_to_json(const ModalityInput& input);
ModalityInput modality_input_from_json(const Json& j);

/// Checks a tag label/score pair; empty when valid.
std::vector<std::string> validate_tag(const Tag& tag);

} // namespace groundchat
