#include "groundchat/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "groundchat/error.hpp"
#include "groundchat/model/checkpoint.hpp"

namespace groundchat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> known) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object", "config");
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown key '" + key + "' in " + std::string(where), "config");
        }
    }
}

template <class T>
void take(const json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what(), "config");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

CliConfig parse_cli_config(const json& j, const fs::path& base) {
    CliConfig c;
    reject_unknown(j, "config", {"seed", "model", "grounding", "adapters", "checkpoint", "service", "training"});
    if (j.contains("seed")) {
        std::uint64_t seed = 0;
        take(j, "seed", seed);
        c.seed = seed;
    }
    if (j.contains("model")) {
        try {
            c.model = j.at("model").get<model::ModelConfig>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("model: ") + e.what(), "config");
        }
    }
    if (j.contains("grounding")) {
        const auto& g = j.at("grounding");
        reject_unknown(g, "grounding", {"tag_threshold", "box_threshold", "nms_iou", "mask_margin"});
        take(g, "tag_threshold", c.grounding.tag_threshold);
        take(g, "box_threshold", c.grounding.box_threshold);
        take(g, "nms_iou", c.grounding.nms_iou);
        take(g, "mask_margin", c.grounding.mask_margin);
        grounding::validate(c.grounding);
    }
    if (j.contains("adapters")) {
        const auto& a = j.at("adapters");
        reject_unknown(a, "adapters", {"mocks", "segmenter", "llm"});
        if (a.contains("mocks")) {
            std::string p;
            take(a, "mocks", p);
            c.adapters.mocks = resolve(base, p);
        }
        take(a, "segmenter", c.adapters.segmenter);
        take(a, "llm", c.adapters.llm);
        (void)grounding::MockSegmenter::parse_mode(c.adapters.segmenter);
        if (c.adapters.llm != "echo" && c.adapters.llm != "toy") {
            throw ConfigError("adapters.llm must be 'echo' or 'toy'", "config");
        }
    }
    if (j.contains("checkpoint")) {
        std::string p;
        take(j, "checkpoint", p);
        c.checkpoint = resolve(base, p);
    }
    if (j.contains("service")) {
        const auto& s = j.at("service");
        reject_unknown(s, "service",
                       {"host", "port", "max_upload_mb", "persistence_dir", "allow_text_only", "max_new_tokens"});
        take(s, "host", c.service.host);
        take(s, "port", c.service.port);
        take(s, "max_upload_mb", c.service.max_upload_mb);
        take(s, "allow_text_only", c.service.allow_text_only);
        take(s, "max_new_tokens", c.service.max_new_tokens);
        if (s.contains("persistence_dir")) {
            std::string p;
            take(s, "persistence_dir", p);
            c.service.persistence_dir = resolve(base, p);
        }
        if (c.service.port < 0 || c.service.port > 65535) throw ConfigError("service.port out of range", "config");
        if (!(c.service.max_upload_mb > 0.0)) throw ConfigError("service.max_upload_mb must be positive", "config");
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        reject_unknown(t, "training",
                       {"learning_rate", "warmup_steps", "decay", "steps", "batch_size", "checkpoint_every",
                        "train_vision_qformer"});
        take(t, "learning_rate", c.optimizer.learning_rate);
        take(t, "warmup_steps", c.optimizer.warmup_steps);
        take(t, "decay", c.optimizer.decay);
        take(t, "steps", c.steps);
        take(t, "batch_size", c.batch_size);
        take(t, "checkpoint_every", c.checkpoint_every);
        take(t, "train_vision_qformer", c.train_vision_qformer);
    }
    return c;
}

CliConfig load_cli_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string(), "config");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what(), "config");
    }
    return parse_cli_config(j, path.parent_path());
}

service::Backend make_backend(const CliConfig& config) {
    auto table = std::make_shared<grounding::MockTable>();
    if (config.adapters.mocks) *table = grounding::MockTable::load(config.adapters.mocks->string());

    model::ModelConfig mc = config.model;
    auto stack = std::make_shared<model::MultimodalModel>(model::MultimodalModel::build_toy(mc));
    if (config.checkpoint) model::apply_heads(model::load_checkpoint(config.checkpoint->string()), *stack);
    std::shared_ptr<const model::LLMAdapter> llm = stack->llm_ptr();
    if (config.adapters.llm == "echo") llm = std::make_shared<model::EchoLLM>(llm, table->replies);
    stack->set_llm(std::make_shared<model::SwitchableLLM>(llm));

    service::Backend backend;
    backend.model = stack;
    backend.grounding =
        grounding::make_mock_adapters(table, grounding::MockSegmenter::parse_mode(config.adapters.segmenter));
    return backend;
}

service::ServiceConfig service_config(const CliConfig& config) {
    service::ServiceConfig s;
    s.max_upload_bytes = static_cast<std::size_t>(config.service.max_upload_mb * 1024.0 * 1024.0);
    s.allow_text_only = config.service.allow_text_only;
    s.seed = config.seed.value_or(0);
    s.max_new_tokens = config.service.max_new_tokens;
    s.grounding = config.grounding;
    s.persistence_dir = config.service.persistence_dir;
    return s;
}

} // namespace groundchat::cli
