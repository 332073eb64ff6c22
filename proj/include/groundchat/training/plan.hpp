#pragma once

#include <string_view>

#include "groundchat/model/stack.hpp"

namespace groundchat::training {

enum class Stage { stage1_vision, stage1_audio, stage2 };

std::string_view to_string(Stage stage);
/// Accepts both "stage1_vision" and "stage1-vision" spellings.
Stage parse_stage(std::string_view text);

/// Trainability per parameter group. Encoders and the LLM are frozen in
/// every stage.
struct ParameterGroupPlan {
    bool vision_encoder = false;
    bool vision_qformer = false;
    bool vision_projection = false;
    bool audio_encoder = false;
    bool audio_qformer = false;
    bool audio_projection = false;
    bool llm = false;

    bool trainable(model::ParamGroup group) const;
    bool operator==(const ParameterGroupPlan&) const = default;
};

struct PlanOverrides {
    /// Stage 2 keeps the vision Q-Former frozen unless this is set.
    bool stage2_train_vision_qformer = false;
};

ParameterGroupPlan plan_for_stage(Stage stage, const PlanOverrides& overrides = {});

/// Throws ConfigError if an encoder or the LLM is marked trainable.
void validate_plan(const ParameterGroupPlan& plan);

} // namespace groundchat::training
