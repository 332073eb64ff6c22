#include "groundchat/model/llm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "groundchat/core/digest.hpp"
#include "groundchat/error.hpp"

namespace groundchat::model {

namespace {

constexpr std::uint64_t kDecoderSalt = 0x6c6c6d;

Matrix sinusoidal_positions(std::size_t count, std::size_t dim) {
    Matrix p(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (std::size_t pos = 0; pos < count; ++pos) {
        for (std::size_t i = 0; i < dim; i += 2) {
            const double angle =
                static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
            p(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) = std::sin(angle);
            if (i + 1 < dim) p(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i + 1)) = std::cos(angle);
        }
    }
    return p;
}

} // namespace

std::vector<std::string> EmbeddingSequence::surfaces(const Tokenizer& tokenizer) const {
    std::vector<std::string> out;
    out.reserve(positions.size());
    for (const auto& p : positions) out.push_back(p.token_id >= 0 ? tokenizer.piece(p.token_id) : std::string{});
    return out;
}

ToyDecoderLLM::ToyDecoderLLM(const ModelConfig& config, const Tokenizer& tokenizer)
    : tokenizer_(&tokenizer), dim_(config.llm_dim), heads_(config.llm_heads), max_context_(config.max_context) {
    validate(config);
    Rng rng(config.seed ^ kDecoderSalt);
    const auto vocab = static_cast<Eigen::Index>(tokenizer.vocab_size());
    const auto d = static_cast<Eigen::Index>(dim_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
    embedding_ = random_normal(vocab, d, scale, rng);
    unembedding_ = random_normal(vocab, d, scale, rng);
    w_query = random_normal(d, d, scale, rng);
    w_key = random_normal(d, d, scale, rng);
    w_value = random_normal(d, d, scale, rng);
    w_out = random_normal(d, d, scale, rng);
    positions_ = sinusoidal_positions(max_context_, dim_);
}

Matrix ToyDecoderLLM::embed_tokens(std::span<const int> ids) const {
    Matrix out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tokenizer_->vocab_size()) {
            throw PreconditionError("token id out of range", "llm");
        }
        out.row(static_cast<Eigen::Index>(i)) = embedding_.row(ids[i]);
    }
    return out;
}

Matrix ToyDecoderLLM::forward(const Matrix& x, Cache* cache) const {
    const Eigen::Index n = x.rows();
    if (static_cast<std::size_t>(n) > max_context_) throw OverflowError("sequence exceeds context", "llm");
    const auto dh = static_cast<Eigen::Index>(dim_ / heads_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix input = x + positions_.topRows(n);
    Matrix q = input * w_query;
    Matrix k = input * w_key;
    Matrix v = input * w_value;
    Matrix context(n, static_cast<Eigen::Index>(dim_));
    std::vector<Matrix> attention;
    attention.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h) * dh;
        Matrix scores = (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale;
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = r + 1; c < n; ++c) scores(r, c) = -std::numeric_limits<double>::infinity();
        }
        Matrix a = softmax_rows(scores);
        context.middleCols(c0, dh) = a * v.middleCols(c0, dh);
        attention.push_back(std::move(a));
    }
    const Matrix hidden = input + context * w_out;
    Matrix logits = hidden * unembedding_.transpose();
    if (cache != nullptr) {
        cache->input = std::move(input);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attention = std::move(attention);
    }
    return logits;
}

Matrix ToyDecoderLLM::backward_input(const Cache& cache, const Matrix& d_logits) const {
    const auto dh = static_cast<Eigen::Index>(dim_ / heads_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Matrix d_hidden = d_logits * unembedding_;
    const Matrix d_context = d_hidden * w_out.transpose();
    Matrix d_q(cache.q.rows(), cache.q.cols());
    Matrix d_k(cache.k.rows(), cache.k.cols());
    Matrix d_v(cache.v.rows(), cache.v.cols());
    for (std::size_t h = 0; h < heads_; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h) * dh;
        const Matrix& a = cache.attention[h];
        const Matrix d_a = d_context.middleCols(c0, dh) * cache.v.middleCols(c0, dh).transpose();
        d_v.middleCols(c0, dh) = a.transpose() * d_context.middleCols(c0, dh);
        const Matrix d_scores = softmax_rows_backward(a, d_a) * scale;
        d_q.middleCols(c0, dh) = d_scores * cache.k.middleCols(c0, dh);
        d_k.middleCols(c0, dh) = d_scores.transpose() * cache.q.middleCols(c0, dh);
    }
    return d_hidden + d_q * w_query.transpose() + d_k * w_key.transpose() + d_v * w_value.transpose();
}

RowVector ToyDecoderLLM::next_token_logits(const Matrix& x) const {
    const Eigen::Index n = x.rows();
    if (n == 0) throw PreconditionError("empty sequence", "llm");
    if (static_cast<std::size_t>(n) > max_context_) throw OverflowError("sequence exceeds context", "llm");
    const auto dh = static_cast<Eigen::Index>(dim_ / heads_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Matrix input = x + positions_.topRows(n);
    const RowVector last = input.row(n - 1);
    const RowVector q = last * w_query;
    const Matrix k = input * w_key;
    const Matrix v = input * w_value;
    RowVector context(static_cast<Eigen::Index>(dim_));
    for (std::size_t h = 0; h < heads_; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h) * dh;
        Matrix scores = (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale;
        const Matrix a = softmax_rows(scores);
        context.middleCols(c0, dh) = a * v.middleCols(c0, dh);
    }
    const RowVector hidden = last + context * w_out;
    return hidden * unembedding_.transpose();
}

std::vector<int> ToyDecoderLLM::generate_ids(const Matrix& x, const GenerationConfig& config) const {
    if (x.rows() == 0) throw PreconditionError("generation needs a non-empty sequence", "llm");
    if (static_cast<std::size_t>(x.rows()) > max_context_) {
        throw OverflowError("context overflow: sequence of " + std::to_string(x.rows()) +
                                " positions exceeds max_context " + std::to_string(max_context_),
                            "llm");
    }
    Rng rng(config.seed);
    Matrix seq = x;
    std::vector<int> ids;
    while (ids.size() < config.max_new_tokens && static_cast<std::size_t>(seq.rows()) < max_context_) {
        const RowVector logits = next_token_logits(seq);
        int next = 0;
        if (config.temperature <= 0.0) {
            Eigen::Index arg = 0;
            logits.maxCoeff(&arg);
            next = static_cast<int>(arg);
        } else {
            const RowVector scaled = logits / config.temperature;
            const double max = scaled.maxCoeff();
            std::vector<double> weights(static_cast<std::size_t>(scaled.size()));
            for (Eigen::Index i = 0; i < scaled.size(); ++i) weights[static_cast<std::size_t>(i)] = std::exp(scaled(i) - max);
            std::discrete_distribution<int> dist(weights.begin(), weights.end());
            next = dist(rng);
        }
        if (next == Tokenizer::kEos) break;
        ids.push_back(next);
        seq.conservativeResize(seq.rows() + 1, Eigen::NoChange);
        seq.row(seq.rows() - 1) = embedding_.row(next);
    }
    return ids;
}

std::string ToyDecoderLLM::generate(const EmbeddingSequence& sequence, const GenerationConfig& config) const {
    std::string text = tokenizer_->decode(generate_ids(sequence.rows, config));
    if (!text.empty() && text.front() == ' ') text.erase(0, 1);
    return text;
}

std::string ToyDecoderLLM::parameter_hash() const {
    Sha256 h;
    for (const Matrix* m : {&embedding_, &unembedding_, &w_query, &w_key, &w_value, &w_out, &positions_}) {
        hash_into(h, *m);
    }
    return h.finish();
}

EchoLLM::EchoLLM(std::shared_ptr<const LLMAdapter> base, std::map<std::string, std::string> replies,
                 std::string fallback)
    : base_(std::move(base)), replies_(std::move(replies)), fallback_(std::move(fallback)) {
    if (!base_) throw ConfigError("echo adapter needs a base model for tokenization", "llm");
}

std::string EchoLLM::generate(const EmbeddingSequence& sequence, const GenerationConfig&) const {
    if (sequence.size() == 0) throw PreconditionError("generation needs a non-empty sequence", "llm");
    if (sequence.size() > max_context()) {
        throw OverflowError("context overflow: sequence of " + std::to_string(sequence.size()) +
                                " positions exceeds max_context " + std::to_string(max_context()),
                            "llm");
    }
    std::vector<std::string> digests;
    for (const auto& p : sequence.positions) {
        if (p.token_id < 0 && !p.source_digest.empty() &&
            std::find(digests.begin(), digests.end(), p.source_digest) == digests.end()) {
            digests.push_back(p.source_digest);
        }
    }
    if (digests.size() > 1) {
        std::string key;
        for (const auto& d : digests) key += (key.empty() ? "" : "+") + d;
        if (auto it = replies_.find(key); it != replies_.end()) return it->second;
    }
    std::string reply;
    for (const auto& d : digests) {
        if (auto it = replies_.find(d); it != replies_.end()) reply += (reply.empty() ? "" : " ") + it->second;
    }
    return reply.empty() ? fallback_ : reply;
}

} // namespace groundchat::model

namespace groundchat::model {

std::string SwitchableLLM::generate(const EmbeddingSequence& sequence, const GenerationConfig& config) const {
    if (!available()) throw AdapterError("language model " + base_->name() + " is unavailable", "generate");
    return base_->generate(sequence, config);
}

} // namespace groundchat::model
