#include "groundchat/model/stack.hpp"

#include <variant>

#include "groundchat/error.hpp"

namespace groundchat::model {

namespace {
constexpr std::uint64_t kHeadSalt = 0x68656164;
}

std::string_view to_string(ParamGroup group) {
    switch (group) {
    case ParamGroup::vision_encoder: return "vision_encoder";
    case ParamGroup::vision_qformer: return "vision_qformer";
    case ParamGroup::vision_projection: return "vision_projection";
    case ParamGroup::audio_encoder: return "audio_encoder";
    case ParamGroup::audio_qformer: return "audio_qformer";
    case ParamGroup::audio_projection: return "audio_projection";
    case ParamGroup::llm: return "llm";
    }
    return "unknown";
}

MultimodalModel::MultimodalModel(ModelConfig config, ModalityStack vision, ModalityStack audio,
                                 std::shared_ptr<const LLMAdapter> llm)
    : config_(config), vision_(std::move(vision)), audio_(std::move(audio)), llm_(std::move(llm)) {
    validate(config_);
    if (!vision_.encoder || !audio_.encoder || !llm_) throw ConfigError("model components missing", "model");
    for (const auto* s : {&vision_, &audio_}) {
        if (s->projection.out_dim() != llm_->embedding_dim()) {
            throw ConfigError("projection output dim must equal the LLM embedding dim", "model");
        }
        if (static_cast<std::size_t>(s->qformer.w_key.rows()) != s->encoder->feature_dim()) {
            throw ConfigError("Q-Former input dim must equal the encoder feature dim", "model");
        }
    }
}

MultimodalModel MultimodalModel::build_toy(const ModelConfig& config) {
    validate(config);
    Rng rng(config.seed ^ kHeadSalt);
    auto make_stack = [&](ModalityKind kind) {
        ModalityStack s;
        s.encoder = make_toy_encoder(kind, config);
        s.qformer = QFormerHead::init(config.queries, config.encoder_dim, config.qformer_dim, rng);
        s.projection = ProjectionHead::init(config.qformer_dim, config.llm_dim, rng);
        return s;
    };
    ModalityStack vision = make_stack(ModalityKind::image);
    ModalityStack audio = make_stack(ModalityKind::audio);
    return MultimodalModel(config, std::move(vision), std::move(audio), std::make_shared<ToyDecoderLLM>(config));
}

void MultimodalModel::set_llm(std::shared_ptr<const LLMAdapter> llm) {
    if (!llm || llm->embedding_dim() != config_.llm_dim) throw ConfigError("LLM embedding dim mismatch", "model");
    llm_ = std::move(llm);
}

std::string MultimodalModel::group_hash(ParamGroup group) const {
    switch (group) {
    case ParamGroup::vision_encoder: return vision_.encoder->parameter_hash();
    case ParamGroup::vision_qformer: return vision_.qformer.parameter_hash();
    case ParamGroup::vision_projection: return vision_.projection.parameter_hash();
    case ParamGroup::audio_encoder: return audio_.encoder->parameter_hash();
    case ParamGroup::audio_qformer: return audio_.qformer.parameter_hash();
    case ParamGroup::audio_projection: return audio_.projection.parameter_hash();
    case ParamGroup::llm: return llm_->parameter_hash();
    }
    return {};
}

std::map<ParamGroup, std::string> MultimodalModel::group_hashes() const {
    std::map<ParamGroup, std::string> out;
    for (auto g : kAllParamGroups) out.emplace(g, group_hash(g));
    return out;
}

EmbeddingBlock encode_modality(const ModalityInput& input, const ModalityStack& stack) {
    if (input.kind() != stack.encoder->kind()) {
        throw InputError("input kind " + std::string(to_string(input.kind())) + " does not match the " +
                             std::string(to_string(stack.encoder->kind())) + " stack",
                         "encode");
    }
    const Matrix features = stack.encoder->encode(input);
    Matrix values = stack.projection.forward(stack.qformer.forward(features));
    if (!values.allFinite()) throw AdapterError("modality block contains non-finite values", "encode");
    return {std::move(values), input.digest()};
}

EmbeddingSequence splice_embeddings(const prompting::PromptAssembly& prompt,
                                    const std::map<std::string, EmbeddingBlock>& blocks, const LLMAdapter& llm) {
    const auto dim = static_cast<Eigen::Index>(llm.embedding_dim());
    std::vector<Matrix> parts;
    EmbeddingSequence seq;
    Eigen::Index total = 0;
    for (const auto& segment : prompt.segments()) {
        if (const auto* text = std::get_if<prompting::TextSegment>(&segment)) {
            const auto ids = llm.tokenizer().encode(text->text);
            parts.push_back(llm.embed_tokens(ids));
            for (int id : ids) seq.positions.push_back({id, {}, {}});
        } else {
            const auto& slot = std::get<prompting::ModalitySlot>(segment);
            const auto it = blocks.find(slot.slot_id);
            if (it == blocks.end()) throw PreconditionError("no embedding block for slot " + slot.slot_id, "splice");
            if (it->second.values.cols() != dim) {
                throw PreconditionError("block for slot " + slot.slot_id + " has dim " +
                                            std::to_string(it->second.values.cols()) + ", expected " +
                                            std::to_string(dim),
                                        "splice");
            }
            parts.push_back(it->second.values);
            const std::string& digest = it->second.source_digest.empty() ? slot.source_digest : it->second.source_digest;
            for (Eigen::Index r = 0; r < it->second.values.rows(); ++r) seq.positions.push_back({-1, slot.slot_id, digest});
        }
        total += parts.back().rows();
    }
    seq.rows.resize(total, dim);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        seq.rows.middleRows(at, p.rows()) = p;
        at += p.rows();
    }
    return seq;
}

std::string generate(const EmbeddingSequence& sequence, const LLMAdapter& llm, const GenerationConfig& config) {
    if (sequence.size() == 0) throw PreconditionError("generation needs a non-empty sequence", "generate");
    if (sequence.size() > llm.max_context()) {
        throw OverflowError("context overflow: sequence of " + std::to_string(sequence.size()) +
                                " positions exceeds max_context " + std::to_string(llm.max_context()),
                            "generate");
    }
    return llm.generate(sequence, config);
}

std::string respond(const MultimodalModel& model, const prompting::PromptAssembly& prompt,
                    const std::map<std::string, ModalityInput>& inputs, const GenerationConfig& config) {
    std::map<std::string, EmbeddingBlock> blocks;
    for (const auto& slot : prompt.slots()) {
        const auto it = inputs.find(slot.slot_id);
        if (it == inputs.end()) throw PreconditionError("no input for slot " + slot.slot_id, "respond");
        blocks.emplace(slot.slot_id, encode_modality(it->second, model.stack(slot.kind)));
    }
    return generate(splice_embeddings(prompt, blocks, model.llm()), model.llm(), config);
}

} // namespace groundchat::model
