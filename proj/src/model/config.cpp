#include "groundchat/model/config.hpp"

#include <set>
#include <string>

#include "groundchat/error.hpp"

namespace groundchat::model {

void validate(const ModelConfig& c) {
    if (c.queries == 0 || c.qformer_dim == 0 || c.llm_dim == 0 || c.encoder_dim == 0) {
        throw ConfigError("model dimensions must be positive", "model");
    }
    if (c.llm_heads == 0 || c.llm_dim % c.llm_heads != 0) {
        throw ConfigError("llm_dim must be divisible by llm_heads", "model");
    }
    if (c.patch_size <= 0 || c.image_size <= 0 || c.image_size % c.patch_size != 0) {
        throw ConfigError("image_size must be a positive multiple of patch_size", "model");
    }
    if (c.mel.n_fft <= 0 || c.mel.hop <= 0 || c.mel.n_mels <= 0 || c.mel.sample_rate <= 0 || c.audio_tokens == 0) {
        throw ConfigError("audio front-end parameters must be positive", "model");
    }
    if (c.max_context < 2) throw ConfigError("max_context too small", "model");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"queries", c.queries},         {"qformer_dim", c.qformer_dim},
                       {"llm_dim", c.llm_dim},         {"encoder_dim", c.encoder_dim},
                       {"llm_heads", c.llm_heads},     {"max_context", c.max_context},
                       {"image_size", c.image_size},   {"patch_size", c.patch_size},
                       {"sample_rate", c.mel.sample_rate}, {"n_fft", c.mel.n_fft},
                       {"hop", c.mel.hop},             {"n_mels", c.mel.n_mels},
                       {"audio_tokens", c.audio_tokens}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (!j.is_object()) throw ConfigError("model config must be an object", "model");
    static const std::set<std::string> known = {"queries",     "qformer_dim", "llm_dim", "encoder_dim", "llm_heads",
                                                 "max_context", "image_size",  "patch_size", "sample_rate", "n_fft",
                                                 "hop",         "n_mels",      "audio_tokens", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("unknown model config key '" + key + "'", "model");
    }
    try {
        auto take = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        take("queries", c.queries);
        take("qformer_dim", c.qformer_dim);
        take("llm_dim", c.llm_dim);
        take("encoder_dim", c.encoder_dim);
        take("llm_heads", c.llm_heads);
        take("max_context", c.max_context);
        take("image_size", c.image_size);
        take("patch_size", c.patch_size);
        take("sample_rate", c.mel.sample_rate);
        take("n_fft", c.mel.n_fft);
        take("hop", c.mel.hop);
        take("n_mels", c.mel.n_mels);
        take("audio_tokens", c.audio_tokens);
        take("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what(), "model");
    }
    validate(c);
}

} // namespace groundchat::model
