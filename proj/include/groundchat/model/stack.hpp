#pragma once

#include <map>
#include <memory>
#include <string>

#include "groundchat/core/types.hpp"
#include "groundchat/model/config.hpp"
#include "groundchat/model/encoders.hpp"
#include "groundchat/model/heads.hpp"
#include "groundchat/model/llm.hpp"
#include "groundchat/prompting/prompt.hpp"

namespace groundchat::model {

/// Frozen encoder + Q-Former + projection for one modality.
struct ModalityStack {
    std::shared_ptr<const ModalityEncoder> encoder;
    QFormerHead qformer;
    ProjectionHead projection;
};

/// Q x D_llm modality embeddings for one slot.
struct EmbeddingBlock {
    Matrix values;
    std::string source_digest;
};

enum class ParamGroup {
    vision_encoder,
    vision_qformer,
    vision_projection,
    audio_encoder,
    audio_qformer,
    audio_projection,
    llm,
};

inline constexpr ParamGroup kAllParamGroups[] = {
    ParamGroup::vision_encoder, ParamGroup::vision_qformer, ParamGroup::vision_projection, ParamGroup::audio_encoder,
    ParamGroup::audio_qformer,  ParamGroup::audio_projection, ParamGroup::llm};

std::string_view to_string(ParamGroup group);

/// The full stack: one ModalityStack per modality sharing a frozen LLM.
class MultimodalModel {
  public:
    MultimodalModel(ModelConfig config, ModalityStack vision, ModalityStack audio, std::shared_ptr<const LLMAdapter> llm);

    /// Seeded toy encoders, heads and decoder.
    static MultimodalModel build_toy(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }
    ModalityStack& stack(ModalityKind kind) { return kind == ModalityKind::image ? vision_ : audio_; }
    const ModalityStack& stack(ModalityKind kind) const { return kind == ModalityKind::image ? vision_ : audio_; }
    const LLMAdapter& llm() const { return *llm_; }
    std::shared_ptr<const LLMAdapter> llm_ptr() const { return llm_; }
    void set_llm(std::shared_ptr<const LLMAdapter> llm);

    std::string group_hash(ParamGroup group) const;
    std::map<ParamGroup, std::string> group_hashes() const;

  private:
    ModelConfig config_;
    ModalityStack vision_;
    ModalityStack audio_;
    std::shared_ptr<const LLMAdapter> llm_;
};

/// encoder -> Q-Former -> projection; returns a Q x D_llm block.
EmbeddingBlock encode_modality(const ModalityInput& input, const ModalityStack& stack);

/// Replaces every slot of the prompt by its block; text segments go through
/// the LLM's tokenizer and embedding table. Throws PreconditionError naming
/// a missing slot or a block of the wrong width.
EmbeddingSequence splice_embeddings(const prompting::PromptAssembly& prompt,
                                    const std::map<std::string, EmbeddingBlock>& blocks, const LLMAdapter& llm);

/// Checks the sequence against the LLM context and decodes a reply.
std::string generate(const EmbeddingSequence& sequence, const LLMAdapter& llm, const GenerationConfig& config);

/// Convenience: encode every slot's input, splice, and generate.
std::string respond(const MultimodalModel& model, const prompting::PromptAssembly& prompt,
                    const std::map<std::string, ModalityInput>& inputs, const GenerationConfig& config);

} // namespace groundchat::model
