#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "groundchat/core/types.hpp"
#include "groundchat/model/stack.hpp"
#include "groundchat/training/plan.hpp"

namespace groundchat::training {

using model::Matrix;

/// RMSprop without momentum, learning rate ramped linearly over
/// `warmup_steps` and constant afterwards.
struct OptimizerConfig {
    double learning_rate = 1e-2;
    std::size_t warmup_steps = 20;
    double decay = 0.99;
    double epsilon = 1e-8;
};

double learning_rate_at(const OptimizerConfig& config, std::size_t step);

struct OptimizerState {
    std::size_t step = 0;
    std::map<std::string, Matrix> square_avg;
};

/// Encoder outputs keyed by media digest; valid because encoders are frozen.
class FeatureCache {
  public:
    const Matrix& features(const ModalityInput& input, const model::ModalityEncoder& encoder);
    std::size_t size() const { return cache_.size(); }

  private:
    std::map<std::string, Matrix> cache_;
};

struct TrainState {
    OptimizerState optimizer;
    FeatureCache features;
};

/// Stage-1 sample: a modality input and its caption, no prompt.
struct CaptionPair {
    ModalityInput input;
    std::string caption;
};

/// Stage-2 sample with its media resolved.
struct TrainingExample {
    std::optional<ModalityInput> image;
    std::optional<ModalityInput> audio;
    std::string instruction;
    std::string response;
    bool related = true;
};

/// Gradients keyed by checkpoint tensor names ("audio.qformer.queries", ...).
using Gradients = std::map<std::string, Matrix>;

/// Loss of one sequence plus everything the checks need.
struct SequenceLoss {
    double loss = 0.0;
    std::size_t boundary = 0; // first position that carries loss
    std::size_t targets = 0;  // number of predicted tokens
    Matrix logits;            // n x V
    Matrix d_logits;          // dL/dlogits, n x V
    Gradients grads;          // only for plan-trainable groups
};

/// Forward (and backward when `with_grads`) for one stage-1 pair. The
/// caption tokens follow the modality block directly.
SequenceLoss stage1_loss(const model::MultimodalModel& model, const CaptionPair& pair, const ParameterGroupPlan& plan,
                         bool with_grads = true, FeatureCache* cache = nullptr);

/// Forward (and backward) for one stage-2 example rendered through the chat
/// template; loss only on tokens after the final `###Assistant:`.
SequenceLoss stage2_loss(const model::MultimodalModel& model, const TrainingExample& example,
                         const ParameterGroupPlan& plan, bool with_grads = true, FeatureCache* cache = nullptr);

struct StepResult {
    double loss = 0.0; // mean over the samples that ran
    std::size_t samples = 0;
    std::size_t skipped = 0;
    double learning_rate = 0.0;
};

/// Throws PreconditionError on a mixed-modality batch or one that does not
/// match the stage's modality.
StepResult stage1_step(std::span<const CaptionPair> batch, Stage stage, model::MultimodalModel& model,
                       const ParameterGroupPlan& plan, TrainState& state, const OptimizerConfig& config);

/// Samples that fail to render are skipped and counted.
StepResult stage2_step(std::span<const TrainingExample> batch, model::MultimodalModel& model,
                       const ParameterGroupPlan& plan, TrainState& state, const OptimizerConfig& config);

/// Greedy reply of the model to an example's instruction and media.
std::string decode_reply(const model::MultimodalModel& model, const TrainingExample& example,
                         std::size_t max_new_tokens = 64);

struct TrainConfig {
    Stage stage = Stage::stage2;
    OptimizerConfig optimizer;
    std::size_t steps = 100;
    std::size_t batch_size = 4;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0; // 0 disables periodic checkpoints
    PlanOverrides overrides;
};

/// Throws ConfigError for non-positive steps, batch size or learning rate.
void validate(const TrainConfig& config);

struct TrainReport {
    std::size_t steps = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::map<model::ParamGroup, std::string> hashes_before;
    std::map<model::ParamGroup, std::string> hashes_after;
};

struct TrainHooks {
    std::ostream* log = nullptr; // one JSON record per step
    std::function<void(std::size_t step)> checkpoint;
};

/// Seeded shuffling, fixed-size batches, optional LDJSON log.
TrainReport train_stage1(const TrainConfig& config, model::MultimodalModel& model, std::span<const CaptionPair> data,
                         const TrainHooks& hooks = {});
TrainReport train_stage2(const TrainConfig& config, model::MultimodalModel& model,
                         std::span<const TrainingExample> data, const TrainHooks& hooks = {});

} // namespace groundchat::training
