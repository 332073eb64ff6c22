#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundchat/core/mask.hpp"

namespace groundchat {

struct Tag {
    std::string label;  // non-empty, lowercase
    double score = 0.0; // [0, 1]

    bool operator==(const Tag&) const = default;
};

/// Ordered tagger output, deduplicated by exact label. Insertion keeps the
/// first occurrence of a label and preserves order.
class TagSet {
  public:
    TagSet() = default;
    explicit TagSet(std::vector<Tag> tags);

    /// Returns false if the label was already present.
    bool add(Tag tag);

    const std::vector<Tag>& tags() const noexcept { return tags_; }
    std::size_t size() const noexcept { return tags_.size(); }
    bool empty() const noexcept { return tags_.empty(); }
    bool contains(std::string_view label) const;

    bool operator==(const TagSet&) const = default;

  private:
    std::vector<Tag> tags_;
};

/// Axis-aligned box in absolute pixel coordinates of the source image.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    bool valid_for(int image_width, int image_height) const noexcept;

    bool operator==(const BoundingBox&) const = default;
};

double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

struct GroundedEntity {
    std::string label;
    BoundingBox box;
    std::optional<SegmentMask> mask;
    double detector_score = 0.0;

    bool operator==(const GroundedEntity&) const = default;
};

/// Whether every on-pixel of `mask` lies inside `box` grown by `margin` px.
bool mask_within_box(const SegmentMask& mask, const BoundingBox& box, double margin);

struct EntityMatch {
    std::size_t entity_index = 0;
    std::size_t start = 0; // byte offsets into the response text, [start, end)
    std::size_t end = 0;
    std::string surface;

    bool operator==(const EntityMatch&) const = default;
};

enum class ModalityKind { image, audio };
enum class MediaFormat { png, jpeg, wav, flac, mp3 };

std::string_view to_string(ModalityKind kind);
std::string_view to_string(MediaFormat format);
ModalityKind parse_modality_kind(std::string_view text);
MediaFormat parse_media_format(std::string_view text);
bool format_matches_kind(MediaFormat format, ModalityKind kind) noexcept;

/// Sniffs the container format from magic bytes; nullopt when unrecognized.
std::optional<MediaFormat> sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// A media payload with its content digest. Immutable once built.
class ModalityInput {
  public:
    ModalityInput(ModalityKind kind, MediaFormat format, std::vector<std::uint8_t> payload);

    /// Sniffs the format and checks it against `kind`; throws InputError.
    static ModalityInput from_bytes(ModalityKind kind, std::vector<std::uint8_t> payload);
    static ModalityInput from_file(ModalityKind kind, const std::string& path);

    ModalityKind kind() const noexcept { return kind_; }
    MediaFormat format() const noexcept { return format_; }
    const std::vector<std::uint8_t>& payload() const noexcept { return payload_; }
    const std::string& digest() const noexcept { return digest_; }

    bool operator==(const ModalityInput& other) const { return digest_ == other.digest_ && kind_ == other.kind_; }

  private:
    ModalityKind kind_;
    MediaFormat format_;
    std::vector<std::uint8_t> payload_;
    std::string digest_;
};

/// Reference to a ModalityInput held in a content-addressed media store.
struct MediaRef {
    ModalityKind kind = ModalityKind::image;
    MediaFormat format = MediaFormat::png;
    std::string digest;

    static MediaRef of(const ModalityInput& input);
    bool operator==(const MediaRef&) const = default;
};

struct InstructionSample {
    std::optional<MediaRef> image;
    std::optional<MediaRef> audio;
    std::string instruction;
    std::string response;
    bool related = true;

    bool operator==(const InstructionSample&) const = default;
};

enum class Role { human, assistant };
std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct ChatTurn {
    Role role = Role::human;
    std::string text;
    std::vector<MediaRef> attachments;

    bool operator==(const ChatTurn&) const = default;
};

/// Empty iff every InstructionSample invariant holds.
std::vector<std::string> validate_sample(const InstructionSample& sample);

std::vector<std::string> validate_turn(const ChatTurn& turn);

} // namespace groundchat
