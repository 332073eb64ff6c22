#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "groundchat/core/types.hpp"
#include "groundchat/grounding/adapters.hpp"

namespace groundchat::grounding {

struct GroundingConfig {
    double tag_threshold = 0.5;
    double box_threshold = 0.25;
    double nms_iou = 0.9;     // same-label boxes at or above this IoU are suppressed
    double mask_margin = 2.0; // px the mask may exceed its box
};

void validate(const GroundingConfig& config);

struct GroundingAdapters {
    std::shared_ptr<const TaggerAdapter> tagger;
    std::shared_ptr<const DetectorAdapter> detector;
    std::shared_ptr<const SegmenterAdapter> segmenter;
    std::shared_ptr<const TextLLMAdapter> matcher;
};

struct StageIssue {
    std::string stage;
    std::string message;
    bool operator==(const StageIssue&) const = default;
};

struct GroundingResult {
    int image_width = 0;
    int image_height = 0;
    TagSet tags;
    std::vector<GroundedEntity> entities;
    std::vector<EntityMatch> matches;
    std::map<std::string, double> timings_ms; // tag, detect, segment, match
    std::vector<StageIssue> errors;           // later-stage failures
    std::vector<std::string> diagnostics;     // matcher output problems
    std::size_t clipped_masks = 0;            // masks that leaked outside their box
};

/// Decodes, calls the tagger, lowercases, drops low scores and duplicates.
TagSet tag_image(const ModalityInput& image, const TaggerAdapter& tagger, const GroundingConfig& config = {});
TagSet tag_image(const ModalityInput& image, const cv::Mat& rgb, const TaggerAdapter& tagger,
                 const GroundingConfig& config = {});

/// "t1,t2,...": labels in TagSet order, no spaces.
std::string compose_detection_query(const TagSet& tags);

/// Clamps boxes to the image, drops degenerate ones and those under the
/// box threshold, sorts by descending score (stable) and applies
/// same-label NMS.
std::vector<Detection> detect_entities(const ModalityInput& image, const cv::Mat& rgb, std::string_view query,
                                       const DetectorAdapter& detector, const GroundingConfig& config = {});

/// One entity per detection. Mask pixels beyond the box grown by the
/// margin are cleared; `clipped` counts the masks that needed it.
std::vector<GroundedEntity> refine_masks(const ModalityInput& image, const cv::Mat& rgb,
                                         const std::vector<Detection>& detections, const SegmenterAdapter& segmenter,
                                         const GroundingConfig& config = {}, std::size_t* clipped = nullptr);

/// Parses `label -> surface` lines. Lines naming an unknown label or a
/// surface absent from the text are dropped; a label matches every entity
/// carrying it. Problems go to `diagnostics`, never to exceptions.
std::vector<EntityMatch> parse_matcher_output(std::string_view output, const std::vector<GroundedEntity>& entities,
                                              std::string_view response_text,
                                              std::vector<std::string>* diagnostics = nullptr);

std::vector<EntityMatch> match_entities(const std::vector<GroundedEntity>& entities, std::string_view response_text,
                                        const TextLLMAdapter& matcher, std::vector<std::string>* diagnostics = nullptr);

/// tag -> detect -> segment -> match. A tagging failure throws; later
/// failures are recorded in `errors` and the partial result is returned.
/// Without response text the match stage is skipped.
GroundingResult run_pipeline(const ModalityInput& image, std::optional<std::string_view> response_text,
                             const GroundingAdapters& adapters, const GroundingConfig& config = {});

struct ResultJsonOptions {
    bool include_timings = true;
};

nlohmann::json to_json(const GroundingResult& result, const ResultJsonOptions& options = {});
GroundingResult result_from_json(const nlohmann::json& j);

/// Image with per-entity tinted masks (box outline when mask-less) and labels.
std::vector<std::uint8_t> render_overlay(const cv::Mat& rgb, const GroundingResult& result);

/// Mock tagger, detector and segmenter over one table plus the
/// substring matcher.
GroundingAdapters make_mock_adapters(std::shared_ptr<const MockTable> table,
                                     MockSegmenter::Mode mode = MockSegmenter::Mode::box);

} // namespace groundchat::grounding
