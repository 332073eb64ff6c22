#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "groundchat/grounding/pipeline.hpp"
#include "groundchat/model/config.hpp"
#include "groundchat/service/chat.hpp"
#include "groundchat/training/trainer.hpp"

namespace groundchat::cli {

/// Operator configuration file. Every object is parsed strictly: unknown
/// keys raise ConfigError. Relative paths resolve against the file's
/// directory.
///
///   {"seed": 7,
///    "model": {ModelConfig keys},
///    "grounding": {"tag_threshold", "box_threshold", "nms_iou", "mask_margin"},
///    "adapters": {"mocks": path, "segmenter": "box|ellipse|faulty", "llm": "echo|toy"},
///    "checkpoint": path,
///    "service": {"host", "port", "max_upload_mb", "persistence_dir", "allow_text_only",
///                "max_new_tokens"},
///    "training": {"learning_rate", "warmup_steps", "decay", "steps", "batch_size",
///                 "checkpoint_every", "train_vision_qformer"}}
struct CliConfig {
    std::optional<std::uint64_t> seed;
    model::ModelConfig model;
    grounding::GroundingConfig grounding;

    struct Adapters {
        std::optional<std::filesystem::path> mocks;
        std::string segmenter = "box";
        std::string llm = "echo";
    } adapters;

    std::optional<std::filesystem::path> checkpoint;

    struct Service {
        std::string host = "127.0.0.1";
        int port = 8080;
        double max_upload_mb = 20.0;
        std::optional<std::filesystem::path> persistence_dir;
        bool allow_text_only = false;
        std::size_t max_new_tokens = 64;
    } service;

    training::OptimizerConfig optimizer;
    std::size_t steps = 100;
    std::size_t batch_size = 4;
    std::size_t checkpoint_every = 0;
    bool train_vision_qformer = false;
};

CliConfig parse_cli_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
CliConfig load_cli_config(const std::filesystem::path& path);

/// Mock grounding adapters and a model whose LLM is the canned-reply echo
/// adapter ("echo") or the toy decoder ("toy"), optionally with heads
/// from the configured checkpoint. The LLM is wrapped in SwitchableLLM.
service::Backend make_backend(const CliConfig& config);

service::ServiceConfig service_config(const CliConfig& config);

} // namespace groundchat::cli
