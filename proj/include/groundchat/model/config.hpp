#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

#include "groundchat/media/audio.hpp"

namespace groundchat::model {

/// Shapes and seeds of the toy modality stack. Q, D_q and D_llm default to
/// (32, 64, 128); the frozen encoders and decoder are fully determined by
/// `seed`.
struct ModelConfig {
    std::size_t queries = 32;
    std::size_t qformer_dim = 64;
    std::size_t llm_dim = 128;
    std::size_t encoder_dim = 64;
    std::size_t llm_heads = 4;
    std::size_t max_context = 512;
    int image_size = 32;
    int patch_size = 8;
    media::MelConfig mel{};
    std::size_t audio_tokens = 16;
    std::uint64_t seed = 1234;

    bool operator==(const ModelConfig&) const = default;
};

/// Throws ConfigError on inconsistent shapes.
void validate(const ModelConfig& config);

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Strict: unknown keys are rejected; missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

} // namespace groundchat::model
