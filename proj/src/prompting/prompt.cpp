#include "groundchat/prompting/prompt.hpp"

#include <array>

#include "groundchat/error.hpp"

namespace groundchat::prompting {

namespace {

constexpr std::array<std::string_view, 3> kLocalizationFamily = {
    kLocalizeSound,
    "Which object in this image is making the sound you hear?",
    "Point out the object in the image that produces this sound.",
};

constexpr std::array<std::string_view, 3> kRelatednessFamily = {
    kAskRelatedness,
    "Do the audio and the image match? Describe each of them.",
    "Is the sound related to what the image shows? Tell me what each one contains.",
};

void reject_reserved(std::string_view text, std::string_view what) {
    if (text.find(kModalityPlaceholder) != std::string_view::npos) {
        throw PreconditionError(std::string(what) + " contains the reserved token <ModalityHere>", "prompting");
    }
}

} // namespace

std::span<const std::string_view> localization_family() { return kLocalizationFamily; }
std::span<const std::string_view> relatedness_family() { return kRelatednessFamily; }

const std::string_view kMatcherInstruction =
    "You are given a list of visual entities detected in an image, inside <List></List>, and a text "
    "describing the image, inside <Text></Text>. For every entity that the text refers to, output one "
    "line of the form `entity -> phrase`, where entity is copied exactly from the list and phrase is an "
    "exact substring of the text that refers to it. Output nothing else. If no entity is mentioned, "
    "output nothing.";

void PromptAssembly::append_text(std::string_view text) {
    if (text.empty()) return;
    if (!segments_.empty()) {
        if (auto* last = std::get_if<TextSegment>(&segments_.back())) {
            last->text += text;
            return;
        }
    }
    segments_.emplace_back(TextSegment{std::string(text)});
}

void PromptAssembly::append_slot(ModalitySlot slot) { segments_.emplace_back(std::move(slot)); }

std::vector<ModalitySlot> PromptAssembly::slots() const {
    std::vector<ModalitySlot> out;
    for (const auto& seg : segments_) {
        if (const auto* slot = std::get_if<ModalitySlot>(&seg)) out.push_back(*slot);
    }
    return out;
}

std::string PromptAssembly::render() const {
    std::string out;
    for (const auto& seg : segments_) {
        if (const auto* text = std::get_if<TextSegment>(&seg)) {
            out += text->text;
        } else {
            out += kModalityPlaceholder;
        }
    }
    return out;
}

namespace {

struct HumanTurnSpec {
    std::string_view text;
    const MediaRef* image = nullptr;
    const MediaRef* audio = nullptr;
    bool has_image = false;
    bool has_audio = false;
    std::string_view image_digest;
    std::string_view audio_digest;
};

void append_human(PromptAssembly& prompt, const HumanTurnSpec& turn, std::size_t& next_slot) {
    prompt.append_text(kHumanPrefix);
    prompt.append_text(" ");
    auto slot_id = [&] { return "slot-" + std::to_string(next_slot++); };
    if (turn.has_image) {
        prompt.append_text("<Vision>");
        prompt.append_slot({ModalityKind::image, slot_id(), std::string(turn.image_digest)});
        prompt.append_text("</Vision> ");
    }
    if (turn.has_audio) {
        prompt.append_text("<Audio>");
        prompt.append_slot({ModalityKind::audio, slot_id(), std::string(turn.audio_digest)});
        prompt.append_text("</Audio> ");
    }
    prompt.append_text(turn.text);
}

} // namespace

PromptAssembly build_chat_prompt(std::span<const ChatTurn> turns, std::string_view current_instruction,
                                 bool has_image, bool has_audio, const ChatPromptOptions& options) {
    if (current_instruction.empty()) throw PreconditionError("current instruction is empty", "prompting");
    reject_reserved(current_instruction, "instruction");

    bool any_modality = has_image || has_audio;
    for (const auto& turn : turns) {
        if (!turn.attachments.empty()) any_modality = true;
    }
    if (!any_modality && !options.allow_text_only) {
        throw PreconditionError("no image or audio in the conversation and text-only chat is disabled", "prompting");
    }

    PromptAssembly prompt;
    std::size_t next_slot = 0;
    for (const auto& turn : turns) {
        reject_reserved(turn.text, "turn text");
        if (turn.role == Role::assistant) {
            if (!turn.attachments.empty()) throw PreconditionError("assistant turn carries attachments", "prompting");
            prompt.append_text(kAssistantMarker);
            prompt.append_text(" ");
            prompt.append_text(turn.text);
            prompt.append_text(" ");
            continue;
        }
        HumanTurnSpec spec;
        spec.text = turn.text;
        for (const auto& ref : turn.attachments) {
            const MediaRef*& target = ref.kind == ModalityKind::image ? spec.image : spec.audio;
            if (target != nullptr) throw PreconditionError("a turn may carry at most one image and one audio", "prompting");
            target = &ref;
        }
        spec.has_image = spec.image != nullptr;
        spec.has_audio = spec.audio != nullptr;
        if (spec.image) spec.image_digest = spec.image->digest;
        if (spec.audio) spec.audio_digest = spec.audio->digest;
        append_human(prompt, spec, next_slot);
        prompt.append_text(" ");
    }

    HumanTurnSpec current;
    current.text = current_instruction;
    current.has_image = has_image;
    current.has_audio = has_audio;
    current.image_digest = options.image_digest;
    current.audio_digest = options.audio_digest;
    append_human(prompt, current, next_slot);
    prompt.append_text(" ");
    prompt.append_text(kAssistantMarker);
    return prompt;
}

std::string MatchingPrompt::full() const { return system + "\n\n" + user; }

MatchingPrompt build_matching_prompt(std::span<const std::string> labels, std::string_view response_text) {
    if (response_text.empty()) throw PreconditionError("response text is empty", "matching");
    std::string user = "<List>";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) user += ", ";
        user += labels[i];
    }
    user += "</List>,<Text>";
    user += response_text;
    user += "</Text>";
    return {std::string(kMatcherInstruction), std::move(user)};
}

std::size_t response_loss_boundary(std::span<const std::string> tokens, std::string_view marker) {
    std::string joined;
    std::vector<std::size_t> starts;
    starts.reserve(tokens.size());
    for (const auto& tok : tokens) {
        starts.push_back(joined.size());
        joined += tok;
    }
    const auto pos = marker.empty() ? std::string::npos : joined.rfind(marker);
    if (pos == std::string::npos) throw PreconditionError("malformed training string", "prompting");
    const std::size_t marker_end = pos + marker.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (starts[i] >= marker_end && !tokens[i].empty()) return i;
    }
    return tokens.size();
}

} // namespace groundchat::prompting
