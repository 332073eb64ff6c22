#include "groundchat/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "groundchat/core/digest.hpp"
#include "groundchat/error.hpp"

namespace groundchat {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::adapter: return "adapter";
    case ErrorKind::config: return "config";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::format: return "format";
    }
    return "unknown";
}

TagSet::TagSet(std::vector<Tag> tags) {
    for (auto& tag : tags) add(std::move(tag));
}

bool TagSet::add(Tag tag) {
    if (contains(tag.label)) return false;
    tags_.push_back(std::move(tag));
    return true;
}

bool TagSet::contains(std::string_view label) const {
    return std::any_of(tags_.begin(), tags_.end(), [&](const Tag& t) { return t.label == label; });
}

bool BoundingBox::valid_for(int image_width, int image_height) const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max) &&
           0.0 <= x_min && x_min < x_max && x_max <= image_width && 0.0 <= y_min && y_min < y_max &&
           y_max <= image_height;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

bool mask_within_box(const SegmentMask& mask, const BoundingBox& box, double margin) {
    // Pixel (x, y) covers [x, x+1) x [y, y+1); it must overlap the dilated box.
    const double left = box.x_min - margin;
    const double top = box.y_min - margin;
    const double right = box.x_max + margin;
    const double bottom = box.y_max + margin;
    std::size_t index = 0;
    bool on = false;
    for (auto run : mask.runs()) {
        if (on) {
            for (std::size_t i = index; i < index + run; ++i) {
                const double x = static_cast<double>(i % static_cast<std::size_t>(mask.width()));
                const double y = static_cast<double>(i / static_cast<std::size_t>(mask.width()));
                if (x + 1.0 <= left || x >= right || y + 1.0 <= top || y >= bottom) return false;
            }
        }
        index += run;
        on = !on;
    }
    return true;
}

std::string_view to_string(ModalityKind kind) { return kind == ModalityKind::image ? "image" : "audio"; }

std::string_view to_string(MediaFormat format) {
    switch (format) {
    case MediaFormat::png: return "png";
    case MediaFormat::jpeg: return "jpeg";
    case MediaFormat::wav: return "wav";
    case MediaFormat::flac: return "flac";
    case MediaFormat::mp3: return "mp3";
    }
    return "unknown";
}

ModalityKind parse_modality_kind(std::string_view text) {
    if (text == "image") return ModalityKind::image;
    if (text == "audio") return ModalityKind::audio;
    throw FormatError("unknown modality kind '" + std::string(text) + "'");
}

MediaFormat parse_media_format(std::string_view text) {
    if (text == "png") return MediaFormat::png;
    if (text == "jpeg" || text == "jpg") return MediaFormat::jpeg;
    if (text == "wav") return MediaFormat::wav;
    if (text == "flac") return MediaFormat::flac;
    if (text == "mp3") return MediaFormat::mp3;
    throw FormatError("unknown media format '" + std::string(text) + "'");
}

bool format_matches_kind(MediaFormat format, ModalityKind kind) noexcept {
    switch (format) {
    case MediaFormat::png:
    case MediaFormat::jpeg: return kind == ModalityKind::image;
    case MediaFormat::wav:
    case MediaFormat::flac:
    case MediaFormat::mp3: return kind == ModalityKind::audio;
    }
    return false;
}

std::optional<MediaFormat> sniff_format(std::span<const std::uint8_t> b) noexcept {
    auto starts = [&](std::initializer_list<std::uint8_t> magic, std::size_t offset = 0) {
        if (b.size() < offset + magic.size()) return false;
        return std::equal(magic.begin(), magic.end(), b.begin() + static_cast<std::ptrdiff_t>(offset));
    };
    if (starts({0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A})) return MediaFormat::png;
    if (starts({0xFF, 0xD8, 0xFF})) return MediaFormat::jpeg;
    if (starts({'R', 'I', 'F', 'F'}) && starts({'W', 'A', 'V', 'E'}, 8)) return MediaFormat::wav;
    if (starts({'f', 'L', 'a', 'C'})) return MediaFormat::flac;
    if (starts({'I', 'D', '3'})) return MediaFormat::mp3;
    if (b.size() >= 2 && b[0] == 0xFF && (b[1] & 0xE0) == 0xE0) return MediaFormat::mp3;
    return std::nullopt;
}

ModalityInput::ModalityInput(ModalityKind kind, MediaFormat format, std::vector<std::uint8_t> payload)
    : kind_(kind), format_(format), payload_(std::move(payload)) {
    if (payload_.empty()) throw InputError("media payload is empty", "media");
    if (!format_matches_kind(format_, kind_)) {
        throw InputError(std::string(to_string(format_)) + " is not a valid " + std::string(to_string(kind_)) +
                             " format",
                         "media");
    }
    digest_ = sha256_hex(payload_);
}

ModalityInput ModalityInput::from_bytes(ModalityKind kind, std::vector<std::uint8_t> payload) {
    if (payload.empty()) throw InputError("media payload is empty", "media");
    const auto format = sniff_format(payload);
    if (!format) throw InputError("unrecognized " + std::string(to_string(kind)) + " container", "media");
    return ModalityInput(kind, *format, std::move(payload));
}

ModalityInput ModalityInput::from_file(ModalityKind kind, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path, "media");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_bytes(kind, std::move(bytes));
}

MediaRef MediaRef::of(const ModalityInput& input) { return {input.kind(), input.format(), input.digest()}; }

std::string_view to_string(Role role) { return role == Role::human ? "human" : "assistant"; }

Role parse_role(std::string_view text) {
    if (text == "human") return Role::human;
    if (text == "assistant") return Role::assistant;
    throw FormatError("unknown role '" + std::string(text) + "'");
}

namespace {

void check_ref(const std::optional<MediaRef>& ref, ModalityKind expected, std::string_view field,
               std::vector<std::string>& out) {
    if (!ref) return;
    if (ref->kind != expected) out.push_back(std::string(field) + ": kind must be " + std::string(to_string(expected)));
    if (!format_matches_kind(ref->format, ref->kind)) {
        out.push_back(std::string(field) + ": format inconsistent with kind");
    }
    if (ref->digest.empty()) out.push_back(std::string(field) + ": digest non-empty");
}

} // namespace

std::vector<std::string> validate_sample(const InstructionSample& sample) {
    std::vector<std::string> violations;
    if (!sample.image && !sample.audio) violations.emplace_back("at least one modality required");
    check_ref(sample.image, ModalityKind::image, "image", violations);
    check_ref(sample.audio, ModalityKind::audio, "audio", violations);
    if (sample.response.empty()) violations.emplace_back("response non-empty");
    return violations;
}

std::vector<std::string> validate_turn(const ChatTurn& turn) {
    std::vector<std::string> violations;
    if (turn.role == Role::assistant && !turn.attachments.empty()) {
        violations.emplace_back("assistant turns carry no attachments");
    }
    for (const auto& ref : turn.attachments) {
        if (!format_matches_kind(ref.format, ref.kind)) violations.emplace_back("attachment format inconsistent with kind");
    }
    return violations;
}

} // namespace groundchat
