#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "groundchat/model/config.hpp"
#include "groundchat/model/tensor.hpp"
#include "groundchat/model/tokenizer.hpp"

namespace groundchat::model {

/// Where a row of an embedding sequence came from.
struct PositionInfo {
    int token_id = -1; // -1 for injected modality rows
    std::string slot_id;
    std::string source_digest;
};

struct EmbeddingSequence {
    Matrix rows; // n x D_llm
    std::vector<PositionInfo> positions;

    std::size_t size() const { return positions.size(); }
    /// Token surfaces; modality rows contribute empty strings.
    std::vector<std::string> surfaces(const Tokenizer& tokenizer) const;
};

struct GenerationConfig {
    std::size_t max_new_tokens = 64;
    double temperature = 0.0; // 0 selects greedy decoding
    std::uint64_t seed = 0;
};

/// Frozen language model slot. Implementations never mutate parameters.
class LLMAdapter {
  public:
    virtual ~LLMAdapter() = default;
    virtual const Tokenizer& tokenizer() const = 0;
    virtual std::size_t embedding_dim() const = 0;
    virtual std::size_t max_context() const = 0;
    virtual Matrix embed_tokens(std::span<const int> ids) const = 0;
    virtual std::string generate(const EmbeddingSequence& sequence, const GenerationConfig& config) const = 0;
    virtual std::string parameter_hash() const = 0;
    virtual std::string name() const = 0;
};

/// One-block causal decoder: token embeddings + sinusoidal positions,
/// multi-head causal self-attention with a residual connection, and an
/// untied output head. Small enough to train heads against in seconds.
class ToyDecoderLLM final : public LLMAdapter {
  public:
    explicit ToyDecoderLLM(const ModelConfig& config, const Tokenizer& tokenizer = Tokenizer::builtin());

    const Tokenizer& tokenizer() const override { return *tokenizer_; }
    std::size_t embedding_dim() const override { return dim_; }
    std::size_t max_context() const override { return max_context_; }
    Matrix embed_tokens(std::span<const int> ids) const override;
    std::string generate(const EmbeddingSequence& sequence, const GenerationConfig& config) const override;
    std::string parameter_hash() const override;
    std::string name() const override { return "toy-decoder"; }

    struct Cache {
        Matrix input;   // X + P
        Matrix q, k, v; // n x D
        std::vector<Matrix> attention; // per head, n x n
    };

    /// n x V logits for every position.
    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    /// dL/dX given dL/dlogits; parameters stay frozen so only the input
    /// gradient is produced.
    Matrix backward_input(const Cache& cache, const Matrix& d_logits) const;
    /// Logits of the last position only.
    RowVector next_token_logits(const Matrix& x) const;

    /// Token ids of a generation run, without the terminating EOS.
    std::vector<int> generate_ids(const Matrix& x, const GenerationConfig& config) const;

  private:
    const Tokenizer* tokenizer_;
    std::size_t dim_;
    std::size_t heads_;
    std::size_t max_context_;
    Matrix embedding_;   // V x D
    Matrix unembedding_; // V x D
    Matrix w_query, w_key, w_value, w_out;
    Matrix positions_;   // max_context x D
};

/// Returns canned replies keyed by the digests of the spliced modality rows.
/// Lookup order: all distinct digests joined by '+', then each digest alone
/// (replies concatenated in slot order), then `fallback`.
class EchoLLM final : public LLMAdapter {
  public:
    EchoLLM(std::shared_ptr<const LLMAdapter> base, std::map<std::string, std::string> replies,
            std::string fallback = "I cannot describe this input.");

    const Tokenizer& tokenizer() const override { return base_->tokenizer(); }
    std::size_t embedding_dim() const override { return base_->embedding_dim(); }
    std::size_t max_context() const override { return base_->max_context(); }
    Matrix embed_tokens(std::span<const int> ids) const override { return base_->embed_tokens(ids); }
    std::string generate(const EmbeddingSequence& sequence, const GenerationConfig& config) const override;
    std::string parameter_hash() const override { return base_->parameter_hash(); }
    std::string name() const override { return "echo"; }

  private:
    std::shared_ptr<const LLMAdapter> base_;
    std::map<std::string, std::string> replies_;
    std::string fallback_;
};

/// Forwards to `base`; generation throws AdapterError while switched off.
class SwitchableLLM final : public LLMAdapter {
  public:
    explicit SwitchableLLM(std::shared_ptr<const LLMAdapter> base) : base_(std::move(base)) {}

    const Tokenizer& tokenizer() const override { return base_->tokenizer(); }
    std::size_t embedding_dim() const override { return base_->embedding_dim(); }
    std::size_t max_context() const override { return base_->max_context(); }
    Matrix embed_tokens(std::span<const int> ids) const override { return base_->embed_tokens(ids); }
    std::string generate(const EmbeddingSequence& sequence, const GenerationConfig& config) const override;
    std::string parameter_hash() const override { return base_->parameter_hash(); }
    std::string name() const override { return base_->name(); }

    void set_available(bool on) const { available_.store(on); }
    bool available() const { return available_.load(); }
    const LLMAdapter& base() const { return *base_; }

  private:
    std::shared_ptr<const LLMAdapter> base_;
    mutable std::atomic<bool> available_{true};
};

} // namespace groundchat::model
