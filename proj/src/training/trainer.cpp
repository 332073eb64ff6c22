#include "groundchat/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "groundchat/core/serialization.hpp"
#include "groundchat/error.hpp"
#include "groundchat/prompting/prompt.hpp"

namespace groundchat::training {

using model::EmbeddingBlock;
using model::EmbeddingSequence;
using model::ParamGroup;
using model::ToyDecoderLLM;

namespace {

const ToyDecoderLLM& trainable_llm(const model::MultimodalModel& m) {
    const auto* llm = dynamic_cast<const ToyDecoderLLM*>(&m.llm());
    if (!llm) throw PreconditionError("training needs a differentiable LLM; got " + m.llm().name(), "train");
    return *llm;
}

std::string_view prefix(ModalityKind kind) { return kind == ModalityKind::image ? "vision" : "audio"; }

ParamGroup qformer_group(ModalityKind kind) {
    return kind == ModalityKind::image ? ParamGroup::vision_qformer : ParamGroup::audio_qformer;
}

ParamGroup projection_group(ModalityKind kind) {
    return kind == ModalityKind::image ? ParamGroup::vision_projection : ParamGroup::audio_projection;
}

// Forward state of one modality block, kept for the backward pass.
struct BlockTrace {
    ModalityKind kind = ModalityKind::image;
    Eigen::Index offset = 0; // first row in the spliced sequence
    model::QFormerHead::Cache qformer_cache;
    Matrix qformer_out;
    Matrix values;
};

BlockTrace trace_block(const model::MultimodalModel& m, const ModalityInput& input, FeatureCache* cache) {
    const auto& stack = m.stack(input.kind());
    BlockTrace t;
    t.kind = input.kind();
    const Matrix features = cache ? cache->features(input, *stack.encoder) : stack.encoder->encode(input);
    t.qformer_out = stack.qformer.forward(features, &t.qformer_cache);
    t.values = stack.projection.forward(t.qformer_out);
    return t;
}

void add_grad(Gradients& grads, const std::string& name, const Matrix& g) {
    auto it = grads.find(name);
    if (it == grads.end()) grads.emplace(name, g);
    else it->second += g;
}

void backprop_block(const model::MultimodalModel& m, const BlockTrace& t, const Matrix& d_values,
                    const ParameterGroupPlan& plan, Gradients& grads) {
    const auto& stack = m.stack(t.kind);
    const bool train_proj = plan.trainable(projection_group(t.kind));
    const bool train_qf = plan.trainable(qformer_group(t.kind));
    if (!train_proj && !train_qf) return;
    const std::string p(prefix(t.kind));
    const auto pg = stack.projection.backward(t.qformer_out, d_values);
    if (train_proj) {
        add_grad(grads, p + ".projection.weight", pg.weight);
        add_grad(grads, p + ".projection.bias", pg.bias);
    }
    if (train_qf) {
        const auto qg = stack.qformer.backward(t.qformer_cache, pg.input);
        add_grad(grads, p + ".qformer.queries", qg.queries);
        add_grad(grads, p + ".qformer.w_key", qg.w_key);
        add_grad(grads, p + ".qformer.w_value", qg.w_value);
    }
}

// Mean NLL over positions [boundary, n); logits row t-1 predicts token t.
SequenceLoss sequence_loss(const model::MultimodalModel& m, const EmbeddingSequence& seq, std::size_t boundary,
                           std::vector<BlockTrace>& traces, const ParameterGroupPlan& plan, bool with_grads) {
    const auto& llm = trainable_llm(m);
    const std::size_t n = seq.size();
    if (n > llm.max_context()) {
        throw OverflowError("training sequence of " + std::to_string(n) + " positions exceeds max_context " +
                                std::to_string(llm.max_context()),
                            "train");
    }
    if (boundary == 0 || boundary >= n) throw PreconditionError("no response tokens carry loss", "train");

    SequenceLoss out;
    out.boundary = boundary;
    out.targets = n - boundary;
    ToyDecoderLLM::Cache cache;
    out.logits = llm.forward(seq.rows, with_grads ? &cache : nullptr);
    const Matrix probs = model::softmax_rows(out.logits);
    out.d_logits = Matrix::Zero(out.logits.rows(), out.logits.cols());
    const double scale = 1.0 / static_cast<double>(out.targets);
    for (std::size_t t = boundary; t < n; ++t) {
        const int target = seq.positions[t].token_id;
        const auto row = static_cast<Eigen::Index>(t - 1);
        out.loss -= std::log(std::max(probs(row, target), 1e-300)) * scale;
        out.d_logits.row(row) = probs.row(row) * scale;
        out.d_logits(row, target) -= scale;
    }
    if (!with_grads) return out;

    const Matrix d_input = llm.backward_input(cache, out.d_logits);
    const auto q = static_cast<Eigen::Index>(m.config().queries);
    for (const auto& t : traces) backprop_block(m, t, d_input.middleRows(t.offset, q), plan, out.grads);
    return out;
}

void append_tokens(EmbeddingSequence& seq, std::span<const int> ids, const model::LLMAdapter& llm) {
    const Matrix rows = llm.embed_tokens(ids);
    const Eigen::Index at = seq.rows.rows();
    seq.rows.conservativeResize(at + rows.rows(), Eigen::NoChange);
    seq.rows.bottomRows(rows.rows()) = rows;
    for (int id : ids) seq.positions.push_back({id, {}, {}});
}

struct RenderedExample {
    EmbeddingSequence sequence;
    std::vector<BlockTrace> traces;
    std::size_t prompt_length = 0;
};

RenderedExample render_example(const model::MultimodalModel& m, const TrainingExample& ex, FeatureCache* cache,
                               bool with_response) {
    prompting::ChatPromptOptions options;
    if (ex.image) options.image_digest = ex.image->digest();
    if (ex.audio) options.audio_digest = ex.audio->digest();
    const auto prompt = prompting::build_chat_prompt({}, ex.instruction, ex.image.has_value(), ex.audio.has_value(), options);

    RenderedExample r;
    std::map<std::string, EmbeddingBlock> blocks;
    for (const auto& slot : prompt.slots()) {
        const ModalityInput& input = slot.kind == ModalityKind::image ? *ex.image : *ex.audio;
        r.traces.push_back(trace_block(m, input, cache));
        blocks.emplace(slot.slot_id, EmbeddingBlock{r.traces.back().values, input.digest()});
    }
    r.sequence = model::splice_embeddings(prompt, blocks, m.llm());
    for (auto& t : r.traces) {
        const auto digest = t.kind == ModalityKind::image ? ex.image->digest() : ex.audio->digest();
        for (std::size_t i = 0; i < r.sequence.size(); ++i) {
            if (r.sequence.positions[i].token_id < 0 && r.sequence.positions[i].source_digest == digest) {
                t.offset = static_cast<Eigen::Index>(i);
                break;
            }
        }
    }
    r.prompt_length = r.sequence.size();
    if (with_response) {
        auto ids = m.llm().tokenizer().encode(" " + ex.response);
        ids.push_back(model::Tokenizer::kEos);
        append_tokens(r.sequence, ids, m.llm());
    }
    return r;
}

void apply_update(Eigen::Map<Matrix> param, const Matrix& grad, const std::string& name, OptimizerState& state,
                  const OptimizerConfig& config, double lr) {
    auto it = state.square_avg.find(name);
    if (it == state.square_avg.end()) it = state.square_avg.emplace(name, Matrix::Zero(grad.rows(), grad.cols())).first;
    Matrix& avg = it->second;
    avg = config.decay * avg + (1.0 - config.decay) * grad.cwiseProduct(grad);
    param.array() -= lr * grad.array() / (avg.array().sqrt() + config.epsilon);
}

Eigen::Map<Matrix> parameter(model::MultimodalModel& m, const std::string& name) {
    const auto dot = name.find('.');
    auto& stack = m.stack(name.substr(0, dot) == "vision" ? ModalityKind::image : ModalityKind::audio);
    const std::string rest = name.substr(dot + 1);
    auto map = [](auto& x) { return Eigen::Map<Matrix>(x.data(), x.rows(), x.cols()); };
    if (rest == "qformer.queries") return map(stack.qformer.queries);
    if (rest == "qformer.w_key") return map(stack.qformer.w_key);
    if (rest == "qformer.w_value") return map(stack.qformer.w_value);
    if (rest == "projection.weight") return map(stack.projection.weight);
    if (rest == "projection.bias") return map(stack.projection.bias);
    throw PreconditionError("unknown parameter " + name, "train");
}

void step_optimizer(model::MultimodalModel& m, const Gradients& grads, const ParameterGroupPlan& plan,
                    OptimizerState& state, const OptimizerConfig& config, double lr) {
    validate_plan(plan);
    for (const auto& [name, grad] : grads) {
        if (!grad.allFinite()) throw PreconditionError("non-finite gradient for " + name, "train");
        apply_update(parameter(m, name), grad, name, state, config, lr);
    }
}

} // namespace

double learning_rate_at(const OptimizerConfig& config, std::size_t step) {
    if (config.warmup_steps == 0) return config.learning_rate;
    const double ramp = static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
    return config.learning_rate * std::min(1.0, ramp);
}

const Matrix& FeatureCache::features(const ModalityInput& input, const model::ModalityEncoder& encoder) {
    const std::string key = std::string(to_string(input.kind())) + ":" + input.digest();
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, encoder.encode(input)).first;
    return it->second;
}

SequenceLoss stage1_loss(const model::MultimodalModel& m, const CaptionPair& pair, const ParameterGroupPlan& plan,
                         bool with_grads, FeatureCache* cache) {
    if (pair.caption.empty()) throw PreconditionError("caption must be non-empty", "train");
    std::vector<BlockTrace> traces{trace_block(m, pair.input, cache)};
    EmbeddingSequence seq;
    seq.rows = traces.front().values;
    for (Eigen::Index r = 0; r < seq.rows.rows(); ++r) seq.positions.push_back({-1, "slot-0", pair.input.digest()});
    auto ids = m.llm().tokenizer().encode(" " + pair.caption);
    ids.push_back(model::Tokenizer::kEos);
    append_tokens(seq, ids, m.llm());
    return sequence_loss(m, seq, static_cast<std::size_t>(traces.front().values.rows()), traces, plan, with_grads);
}

SequenceLoss stage2_loss(const model::MultimodalModel& m, const TrainingExample& ex, const ParameterGroupPlan& plan,
                         bool with_grads, FeatureCache* cache) {
    if (ex.response.empty()) throw PreconditionError("response non-empty", "train");
    auto r = render_example(m, ex, cache, true);
    const std::size_t boundary = prompting::response_loss_boundary(r.sequence.surfaces(m.llm().tokenizer()));
    return sequence_loss(m, r.sequence, boundary, r.traces, plan, with_grads);
}

namespace {

StepResult finish_step(model::MultimodalModel& m, std::vector<Gradients>& per_sample, double loss_sum,
                       std::size_t skipped, const ParameterGroupPlan& plan, TrainState& state,
                       const OptimizerConfig& config) {
    StepResult res;
    res.samples = per_sample.size();
    res.skipped = skipped;
    res.learning_rate = learning_rate_at(config, state.optimizer.step);
    if (per_sample.empty()) return res;
    res.loss = loss_sum / static_cast<double>(per_sample.size());
    Gradients total;
    const double scale = 1.0 / static_cast<double>(per_sample.size());
    for (auto& g : per_sample) {
        for (auto& [name, grad] : g) add_grad(total, name, grad * scale);
    }
    step_optimizer(m, total, plan, state.optimizer, config, res.learning_rate);
    ++state.optimizer.step;
    return res;
}

} // namespace

StepResult stage1_step(std::span<const CaptionPair> batch, Stage stage, model::MultimodalModel& m,
                       const ParameterGroupPlan& plan, TrainState& state, const OptimizerConfig& config) {
    if (stage == Stage::stage2) throw PreconditionError("stage1_step called for stage 2", "train");
    const ModalityKind expected = stage == Stage::stage1_vision ? ModalityKind::image : ModalityKind::audio;
    for (const auto& p : batch) {
        if (p.input.kind() != expected) {
            throw PreconditionError("stage-1 batch for " + std::string(to_string(stage)) + " contains " +
                                        std::string(to_string(p.input.kind())) + " input",
                                    "train");
        }
    }
    std::vector<Gradients> grads;
    double loss_sum = 0.0;
    for (const auto& p : batch) {
        auto l = stage1_loss(m, p, plan, true, &state.features);
        loss_sum += l.loss;
        grads.push_back(std::move(l.grads));
    }
    return finish_step(m, grads, loss_sum, 0, plan, state, config);
}

StepResult stage2_step(std::span<const TrainingExample> batch, model::MultimodalModel& m,
                       const ParameterGroupPlan& plan, TrainState& state, const OptimizerConfig& config) {
    std::vector<Gradients> grads;
    double loss_sum = 0.0;
    std::size_t skipped = 0;
    for (const auto& ex : batch) {
        SequenceLoss l;
        try {
            l = stage2_loss(m, ex, plan, true, &state.features);
        } catch (const PreconditionError&) {
            ++skipped;
            continue;
        } catch (const OverflowError&) {
            ++skipped;
            continue;
        }
        loss_sum += l.loss;
        grads.push_back(std::move(l.grads));
    }
    return finish_step(m, grads, loss_sum, skipped, plan, state, config);
}

std::string decode_reply(const model::MultimodalModel& m, const TrainingExample& ex, std::size_t max_new_tokens) {
    auto r = render_example(m, ex, nullptr, false);
    model::GenerationConfig cfg;
    cfg.max_new_tokens = max_new_tokens;
    return model::generate(r.sequence, m.llm(), cfg);
}

void validate(const TrainConfig& c) {
    if (c.steps == 0) throw ConfigError("steps must be positive", "train");
    if (c.batch_size == 0) throw ConfigError("batch_size must be positive", "train");
    if (!(c.optimizer.learning_rate > 0.0) || !std::isfinite(c.optimizer.learning_rate)) {
        throw ConfigError("learning_rate must be positive", "train");
    }
    if (!(c.optimizer.decay > 0.0 && c.optimizer.decay < 1.0)) throw ConfigError("decay must be in (0, 1)", "train");
    if (!(c.optimizer.epsilon > 0.0)) throw ConfigError("epsilon must be positive", "train");
}

namespace {

template <class Sample, class StepFn>
TrainReport run_loop(const TrainConfig& config, model::MultimodalModel& m, std::span<const Sample> data,
                     const TrainHooks& hooks, StepFn step_fn) {
    validate(config);
    if (data.empty()) throw PreconditionError("training set is empty", "train");
    const auto plan = plan_for_stage(config.stage, config.overrides);
    validate_plan(plan);

    TrainReport report;
    report.hashes_before = m.group_hashes();
    TrainState state;
    model::Rng rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        std::vector<Sample> batch;
        for (std::size_t i = 0; i < std::min(config.batch_size, data.size()); ++i) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(data[order[cursor++]]);
        }
        const StepResult res = step_fn(std::span<const Sample>(batch), plan, state);
        if (step == 0) report.initial_loss = res.loss;
        report.final_loss = res.loss;
        report.steps = step + 1;
        if (hooks.log) {
            Json hashes = Json::object();
            for (const auto& [g, h] : m.group_hashes()) hashes[std::string(model::to_string(g))] = h;
            Json rec = {{"step", step + 1}, {"stage", to_string(config.stage)}, {"loss", res.loss},
                        {"lr", res.learning_rate}, {"samples", res.samples}, {"skipped", res.skipped},
                        {"param_hashes", hashes}};
            *hooks.log << rec.dump() << '\n';
        }
        if (hooks.checkpoint && config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
            hooks.checkpoint(step + 1);
        }
    }
    report.hashes_after = m.group_hashes();
    return report;
}

} // namespace

TrainReport train_stage1(const TrainConfig& config, model::MultimodalModel& m, std::span<const CaptionPair> data,
                         const TrainHooks& hooks) {
    if (config.stage == Stage::stage2) throw ConfigError("train_stage1 needs a stage-1 stage", "train");
    return run_loop(config, m, data, hooks, [&](std::span<const CaptionPair> b, const ParameterGroupPlan& plan, TrainState& s) {
        return stage1_step(b, config.stage, m, plan, s, config.optimizer);
    });
}

TrainReport train_stage2(const TrainConfig& config, model::MultimodalModel& m, std::span<const TrainingExample> data,
                         const TrainHooks& hooks) {
    if (config.stage != Stage::stage2) throw ConfigError("train_stage2 needs stage2", "train");
    return run_loop(config, m, data, hooks, [&](std::span<const TrainingExample> b, const ParameterGroupPlan& plan, TrainState& s) {
        return stage2_step(b, m, plan, s, config.optimizer);
    });
}

} // namespace groundchat::training
