#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "groundchat/core/types.hpp"

namespace groundchat::prompting {

inline constexpr std::string_view kHumanPrefix = "###Human:";
inline constexpr std::string_view kAssistantMarker = "###Assistant:";
inline constexpr std::string_view kModalityPlaceholder = "<ModalityHere>";

// Instruction families used by the instruction datasets and quick prompts.
inline constexpr std::string_view kDescribeImage = "What is the image?";
inline constexpr std::string_view kDescribeAudio = "Pay attention to the audio and describe what you notice.";
inline constexpr std::string_view kLocalizeSound = "Please find the source that emits the given sound in this image.";
inline constexpr std::string_view kAskRelatedness = "Are the audio and image related to each other? What are they?";

std::span<const std::string_view> localization_family();
std::span<const std::string_view> relatedness_family();

struct TextSegment {
    std::string text;
    bool operator==(const TextSegment&) const = default;
};

struct ModalitySlot {
    ModalityKind kind = ModalityKind::image;
    std::string slot_id;
    std::string source_digest; // empty when the caller did not supply one
    bool operator==(const ModalitySlot&) const = default;
};

using PromptSegment = std::variant<TextSegment, ModalitySlot>;

class PromptAssembly {
  public:
    void append_text(std::string_view text);
    void append_slot(ModalitySlot slot);

    const std::vector<PromptSegment>& segments() const noexcept { return segments_; }
    std::vector<ModalitySlot> slots() const;

    /// Text form with each slot rendered as `<ModalityHere>`.
    std::string render() const;

    bool operator==(const PromptAssembly&) const = default;

  private:
    std::vector<PromptSegment> segments_;
};

struct ChatPromptOptions {
    bool allow_text_only = false;
    std::string image_digest; // source digests recorded on the current turn's slots
    std::string audio_digest;
};

/// Renders prior turns plus the current instruction into the Stage-2 chat
/// layout: `###Human: <Vision>..</Vision> <Audio>..</Audio> instruction ###Assistant:`.
/// Slot ids are "slot-0", "slot-1", ... in order of appearance.
PromptAssembly build_chat_prompt(std::span<const ChatTurn> turns, std::string_view current_instruction,
                                 bool has_image, bool has_audio, const ChatPromptOptions& options = {});

/// Version of the fixed matcher instruction below; bump on any wording change.
inline constexpr int kMatcherInstructionVersion = 1;
extern const std::string_view kMatcherInstruction;

struct MatchingPrompt {
    std::string system; // kMatcherInstruction
    std::string user;   // <List>e1, e2</List>,<Text>t_o</Text>
    std::string full() const;
};

MatchingPrompt build_matching_prompt(std::span<const std::string> labels, std::string_view response_text);

/// Index of the first token that starts at or after the end of the final
/// `marker` occurrence in the concatenated token surfaces. Tokens from that
/// index on carry the loss. Throws PreconditionError("malformed training
/// string") when the marker is absent.
std::size_t response_loss_boundary(std::span<const std::string> tokens, std::string_view marker = kAssistantMarker);

} // namespace groundchat::prompting
