#include "groundchat/training/plan.hpp"

#include <string>

#include "groundchat/error.hpp"

namespace groundchat::training {

std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::stage1_vision: return "stage1_vision";
    case Stage::stage1_audio: return "stage1_audio";
    case Stage::stage2: return "stage2";
    }
    return "unknown";
}

Stage parse_stage(std::string_view text) {
    std::string s(text);
    for (auto& c : s) {
        if (c == '-') c = '_';
    }
    if (s == "stage1_vision") return Stage::stage1_vision;
    if (s == "stage1_audio") return Stage::stage1_audio;
    if (s == "stage2") return Stage::stage2;
    throw ConfigError("unknown training stage '" + std::string(text) + "'", "training");
}

bool ParameterGroupPlan::trainable(model::ParamGroup group) const {
    using model::ParamGroup;
    switch (group) {
    case ParamGroup::vision_encoder: return vision_encoder;
    case ParamGroup::vision_qformer: return vision_qformer;
    case ParamGroup::vision_projection: return vision_projection;
    case ParamGroup::audio_encoder: return audio_encoder;
    case ParamGroup::audio_qformer: return audio_qformer;
    case ParamGroup::audio_projection: return audio_projection;
    case ParamGroup::llm: return llm;
    }
    return false;
}

ParameterGroupPlan plan_for_stage(Stage stage, const PlanOverrides& overrides) {
    ParameterGroupPlan plan;
    switch (stage) {
    case Stage::stage1_vision:
        plan.vision_projection = true;
        break;
    case Stage::stage1_audio:
        plan.audio_qformer = true;
        plan.audio_projection = true;
        break;
    case Stage::stage2:
        plan.vision_projection = true;
        plan.audio_qformer = true;
        plan.audio_projection = true;
        plan.vision_qformer = overrides.stage2_train_vision_qformer;
        break;
    }
    return plan;
}

void validate_plan(const ParameterGroupPlan& plan) {
    if (plan.vision_encoder || plan.audio_encoder || plan.llm) {
        throw ConfigError("modality encoders and the LLM stay frozen in every stage", "training");
    }
}

} // namespace groundchat::training
