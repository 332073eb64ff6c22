#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundchat/datasets/dataset.hpp"
#include "groundchat/grounding/adapters.hpp"
#include "groundchat/training/trainer.hpp"

namespace groundchat::datasets {

// ---- long audio descriptions ----

struct FewShotExample {
    std::vector<std::string> captions;
    std::string description;
};

/// Default instruction sent with every bundle; `{examples}` and
/// `{captions}` are substituted.
extern const std::string_view kDescriptionPromptTemplate;
std::span<const FewShotExample> default_few_shot();

struct DescriptionChecks {
    std::size_t min_words = 25;
    std::size_t min_covered_captions = 2;
};

/// Lowercase content words of at least four letters, minus stop words.
std::vector<std::string> keywords(std::string_view text);

/// Fraction of captions sharing at least one keyword with `description`,
/// and the count behind it.
struct Coverage {
    std::size_t covered = 0;
    double fraction = 0.0;
};
Coverage caption_coverage(std::span<const std::string> captions, std::string_view description);

/// Empty when the description is one paragraph, long enough and covers
/// enough captions; otherwise the failed checks.
std::vector<std::string> check_description(std::span<const std::string> captions, std::string_view description,
                                           const DescriptionChecks& checks = {});

std::string render_description_prompt(std::string_view prompt_template, std::span<const FewShotExample> examples,
                                      std::span<const std::string> captions);

struct FlaggedItem {
    std::size_t index = 0;
    std::string reason;
};

struct DescriptionBuild {
    std::vector<DescribedAudio> items; // in input order, flagged bundles omitted
    std::vector<FlaggedItem> flagged;
    std::size_t llm_calls = 0;
};

/// One LLM call per bundle, retried once when the reply fails a check or
/// the adapter throws; still failing bundles are flagged. Invalid bundles
/// are flagged without a call.
DescriptionBuild build_clotho_detail(std::span<const CaptionBundle> bundles, const grounding::TextLLMAdapter& llm,
                                     std::span<const FewShotExample> few_shot = default_few_shot(),
                                     std::string_view prompt_template = kDescriptionPromptTemplate,
                                     const DescriptionChecks& checks = {});

// ---- positive audio-image-text triples ----

std::span<const std::string_view> default_label_templates();

/// Every template must contain `{label}`; throws ConfigError otherwise.
void validate_templates(std::span<const std::string> templates);

std::string fill_template(std::string_view tmpl, std::string_view label);

/// One sample per pair. Templates and localization instructions are taken
/// round-robin from seeded starting offsets; related is true.
std::vector<InstructionSample> build_vggss_instructions(std::span<const LabeledPair> pairs,
                                                        std::span<const std::string> templates, std::uint64_t seed);

// ---- negative pairs ----

/// "The image shows <caption>." unless the caption already starts with
/// "The image"; terminal punctuation is normalized to one period.
std::string normalize_image_caption(std::string_view caption);
/// "The audio is <caption>." with the same rules.
std::string normalize_audio_caption(std::string_view caption);

struct NegativePairOptions {
    std::size_t max_attempts_per_sample = 64;
};

/// Draws audio and image uniformly (with replacement), rejecting pairs
/// that share a non-empty source id. Throws PreconditionError on empty
/// pools and when a sample cannot be drawn within the attempt budget.
std::vector<InstructionSample> build_negative_pairs(std::span<const CaptionRecord> audio_pool,
                                                    std::span<const CaptionRecord> image_pool, std::size_t count,
                                                    std::uint64_t seed, const NegativePairOptions& options = {});

/// Whether a response has the negative-pair structure: starts with
/// "The image", contains "The audio" exactly once, right after ". ".
bool has_negative_pair_structure(std::string_view response);

/// Positives plus round(ratio * positives) negatives (capped at the
/// negatives available), interleaved by a seeded shuffle.
std::vector<InstructionSample> mix_stage2(std::span<const InstructionSample> positives,
                                          std::span<const InstructionSample> negatives, double ratio,
                                          std::uint64_t seed);

// ---- resolution against a media store ----

training::TrainingExample resolve_example(const InstructionSample& sample, const MediaStore& store);
training::CaptionPair resolve_caption(const CaptionRecord& record, const MediaStore& store);

} // namespace groundchat::datasets
