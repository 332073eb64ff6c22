#include "groundchat/grounding/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "groundchat/core/serialization.hpp"
#include "groundchat/error.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/prompting/prompt.hpp"

namespace groundchat::grounding {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view unquote(std::string_view s) {
    for (const char q : {'"', '\'', '`'}) {
        if (s.size() >= 2 && s.front() == q && s.back() == q) return s.substr(1, s.size() - 2);
    }
    return s;
}

// Runs an adapter call, turning foreign exceptions into AdapterError tagged
// with the stage and keeping library errors but stamping the stage.
template <class Fn>
auto call_adapter(std::string_view stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const AdapterError& e) {
        throw AdapterError(e.what(), std::string(stage));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw AdapterError(e.what(), std::string(stage));
    }
}

cv::Mat decode_for(const ModalityInput& image, std::string_view stage) {
    if (image.kind() != ModalityKind::image) throw InputError("grounding needs an image input", std::string(stage));
    try {
        return media::decode_image(image);
    } catch (const InputError& e) {
        throw InputError(e.what(), std::string(stage));
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

} // namespace

void validate(const GroundingConfig& c) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(c.tag_threshold)) throw ConfigError("tag_threshold must be in [0, 1]", "config");
    if (!unit(c.box_threshold)) throw ConfigError("box_threshold must be in [0, 1]", "config");
    if (!(c.nms_iou > 0.0 && c.nms_iou <= 1.0)) throw ConfigError("nms_iou must be in (0, 1]", "config");
    if (!(c.mask_margin >= 0.0) || !std::isfinite(c.mask_margin)) throw ConfigError("mask_margin must be >= 0", "config");
}

TagSet tag_image(const ModalityInput& image, const TaggerAdapter& tagger, const GroundingConfig& config) {
    return tag_image(image, decode_for(image, "tag"), tagger, config);
}

TagSet tag_image(const ModalityInput& image, const cv::Mat& rgb, const TaggerAdapter& tagger,
                 const GroundingConfig& config) {
    const auto raw = call_adapter("tag", [&] { return tagger.tag(image, rgb); });
    TagSet out;
    for (const auto& t : raw) {
        std::string label = lower(trim(t.label));
        if (label.empty() || !(t.score >= config.tag_threshold) || t.score > 1.0) continue;
        out.add({std::move(label), t.score});
    }
    return out;
}

std::string compose_detection_query(const TagSet& tags) {
    std::string q;
    for (const auto& t : tags.tags()) {
        if (!q.empty()) q += ',';
        q += t.label;
    }
    return q;
}

std::vector<Detection> detect_entities(const ModalityInput& image, const cv::Mat& rgb, std::string_view query,
                                       const DetectorAdapter& detector, const GroundingConfig& config) {
    if (trim(query).empty()) throw PreconditionError("detection query must be non-empty", "detect");
    auto raw = call_adapter("detect", [&] { return detector.detect(image, rgb, query); });
    const double w = rgb.cols;
    const double h = rgb.rows;
    std::vector<Detection> kept;
    for (auto d : raw) {
        if (!(d.score >= config.box_threshold) || d.score > 1.0) continue;
        d.label = lower(trim(d.label));
        if (d.label.empty()) continue;
        d.box.x_min = std::clamp(d.box.x_min, 0.0, w);
        d.box.x_max = std::clamp(d.box.x_max, 0.0, w);
        d.box.y_min = std::clamp(d.box.y_min, 0.0, h);
        d.box.y_max = std::clamp(d.box.y_max, 0.0, h);
        if (!d.box.valid_for(rgb.cols, rgb.rows)) continue;
        kept.push_back(std::move(d));
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Detection> out;
    for (auto& d : kept) {
        const bool suppressed = std::any_of(out.begin(), out.end(), [&](const Detection& k) {
            return k.label == d.label && iou(k.box, d.box) >= config.nms_iou;
        });
        if (!suppressed) out.push_back(std::move(d));
    }
    return out;
}

std::vector<GroundedEntity> refine_masks(const ModalityInput& image, const cv::Mat& rgb,
                                         const std::vector<Detection>& detections, const SegmenterAdapter& segmenter,
                                         const GroundingConfig& config, std::size_t* clipped) {
    for (const auto& d : detections) {
        if (!d.box.valid_for(rgb.cols, rgb.rows)) throw PreconditionError("detection box outside the image", "segment");
    }
    std::vector<GroundedEntity> out;
    out.reserve(detections.size());
    for (const auto& d : detections) {
        SegmentMask mask = call_adapter("segment", [&] { return segmenter.segment(image, rgb, d.box); });
        if (mask.width() != rgb.cols || mask.height() != rgb.rows) {
            throw AdapterError("segmenter returned a " + std::to_string(mask.width()) + "x" +
                                   std::to_string(mask.height()) + " mask for a " + std::to_string(rgb.cols) + "x" +
                                   std::to_string(rgb.rows) + " image",
                               "segment");
        }
        if (!mask_within_box(mask, d.box, config.mask_margin)) {
            const double left = d.box.x_min - config.mask_margin;
            const double top = d.box.y_min - config.mask_margin;
            const double right = d.box.x_max + config.mask_margin;
            const double bottom = d.box.y_max + config.mask_margin;
            auto bits = mask.to_bitmap();
            for (int y = 0; y < mask.height(); ++y) {
                for (int x = 0; x < mask.width(); ++x) {
                    if (x + 1.0 <= left || x >= right || y + 1.0 <= top || y >= bottom) {
                        bits[static_cast<std::size_t>(y) * mask.width() + x] = 0;
                    }
                }
            }
            mask = SegmentMask::from_bitmap(mask.width(), mask.height(), bits);
            if (clipped) ++*clipped;
        }
        out.push_back({d.label, d.box, std::move(mask), d.score});
    }
    return out;
}

std::vector<EntityMatch> parse_matcher_output(std::string_view output, const std::vector<GroundedEntity>& entities,
                                              std::string_view text, std::vector<std::string>* diagnostics) {
    auto note = [&](std::string msg) {
        if (diagnostics) diagnostics->push_back(std::move(msg));
    };
    std::vector<EntityMatch> out;
    std::size_t parsed = 0;
    std::size_t from = 0;
    while (from < output.size()) {
        auto nl = output.find('\n', from);
        if (nl == std::string_view::npos) nl = output.size();
        const auto line = trim(output.substr(from, nl - from));
        from = nl + 1;
        if (line.empty()) continue;
        const auto arrow = line.find("->");
        if (arrow == std::string_view::npos) {
            note("unparseable matcher line: " + std::string(line));
            continue;
        }
        const std::string label = lower(unquote(trim(line.substr(0, arrow))));
        const auto surface = unquote(trim(line.substr(arrow + 2)));
        if (label.empty() || surface.empty()) {
            note("unparseable matcher line: " + std::string(line));
            continue;
        }
        ++parsed;
        const auto at = text.find(surface);
        if (at == std::string_view::npos) {
            note("surface not in response text: " + std::string(surface));
            continue;
        }
        bool known = false;
        for (std::size_t i = 0; i < entities.size(); ++i) {
            if (entities[i].label != label) continue;
            known = true;
            EntityMatch m{i, at, at + surface.size(), std::string(text.substr(at, surface.size()))};
            const bool dup = std::any_of(out.begin(), out.end(), [&](const EntityMatch& o) {
                return o.entity_index == m.entity_index && o.start == m.start && o.end == m.end;
            });
            if (!dup) out.push_back(std::move(m));
        }
        if (!known) note("label not among entities: " + label);
    }
    if (parsed == 0 && !trim(output).empty()) note("matcher output unparseable");
    return out;
}

std::vector<EntityMatch> match_entities(const std::vector<GroundedEntity>& entities, std::string_view text,
                                        const TextLLMAdapter& matcher, std::vector<std::string>* diagnostics) {
    if (text.empty()) throw PreconditionError("response text must be non-empty", "match");
    if (entities.empty()) return {};
    std::vector<std::string> labels;
    for (const auto& e : entities) {
        if (std::find(labels.begin(), labels.end(), e.label) == labels.end()) labels.push_back(e.label);
    }
    const auto prompt = prompting::build_matching_prompt(labels, text);
    const std::string output = call_adapter("match", [&] { return matcher.complete(prompt.system, prompt.user); });
    return parse_matcher_output(output, entities, text, diagnostics);
}

GroundingResult run_pipeline(const ModalityInput& image, std::optional<std::string_view> response_text,
                             const GroundingAdapters& adapters, const GroundingConfig& config) {
    validate(config);
    if (!adapters.tagger || !adapters.detector || !adapters.segmenter || !adapters.matcher) {
        throw ConfigError("grounding needs all four adapters", "config");
    }
    if (response_text && response_text->empty()) throw PreconditionError("response text must be non-empty", "match");
    GroundingResult r;
    auto clock = std::chrono::steady_clock::now();
    const cv::Mat rgb = decode_for(image, "tag");
    r.image_width = rgb.cols;
    r.image_height = rgb.rows;
    r.tags = tag_image(image, rgb, *adapters.tagger, config);
    r.timings_ms["tag"] = elapsed_ms(clock);

    clock = std::chrono::steady_clock::now();
    std::vector<Detection> detections;
    try {
        if (!r.tags.empty()) {
            detections = detect_entities(image, rgb, compose_detection_query(r.tags), *adapters.detector, config);
        }
    } catch (const Error& e) {
        r.errors.push_back({"detect", e.what()});
    }
    r.timings_ms["detect"] = elapsed_ms(clock);

    clock = std::chrono::steady_clock::now();
    try {
        r.entities = refine_masks(image, rgb, detections, *adapters.segmenter, config, &r.clipped_masks);
    } catch (const Error& e) {
        r.errors.push_back({"segment", e.what()});
        r.entities.clear();
        r.clipped_masks = 0;
        for (const auto& d : detections) r.entities.push_back({d.label, d.box, std::nullopt, d.score});
    }
    r.timings_ms["segment"] = elapsed_ms(clock);

    clock = std::chrono::steady_clock::now();
    if (response_text) {
        try {
            r.matches = match_entities(r.entities, *response_text, *adapters.matcher, &r.diagnostics);
        } catch (const Error& e) {
            r.errors.push_back({"match", e.what()});
            r.matches.clear();
        }
    }
    r.timings_ms["match"] = elapsed_ms(clock);
    return r;
}

nlohmann::json to_json(const GroundingResult& r, const ResultJsonOptions& options) {
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"image", {{"width", r.image_width}, {"height", r.image_height}}},
                        {"tags", r.tags},
                        {"entities", r.entities},
                        {"matches", r.matches},
                        {"clipped_masks", r.clipped_masks}};
    auto& errors = j["errors"] = nlohmann::json::array();
    for (const auto& e : r.errors) errors.push_back({{"stage", e.stage}, {"message", e.message}});
    j["diagnostics"] = r.diagnostics;
    if (options.include_timings) j["timings_ms"] = r.timings_ms;
    return j;
}

GroundingResult result_from_json(const nlohmann::json& j) {
    GroundingResult r;
    try {
        r.image_width = j.at("image").at("width").get<int>();
        r.image_height = j.at("image").at("height").get<int>();
        r.tags = j.at("tags").get<TagSet>();
        r.entities = j.at("entities").get<std::vector<GroundedEntity>>();
        r.matches = j.at("matches").get<std::vector<EntityMatch>>();
        r.clipped_masks = j.value("clipped_masks", std::size_t{0});
        for (const auto& e : j.value("errors", nlohmann::json::array())) {
            r.errors.push_back({e.at("stage").get<std::string>(), e.at("message").get<std::string>()});
        }
        r.diagnostics = j.value("diagnostics", std::vector<std::string>{});
        if (j.contains("timings_ms")) r.timings_ms = j.at("timings_ms").get<std::map<std::string, double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed grounding result: ") + e.what(), "grounding");
    }
    for (const auto& m : r.matches) {
        if (m.entity_index >= r.entities.size()) throw FormatError("match refers to a missing entity", "grounding");
    }
    return r;
}

std::vector<std::uint8_t> render_overlay(const cv::Mat& rgb, const GroundingResult& result) {
    static const cv::Scalar kPalette[] = {{230, 25, 75},  {60, 180, 75},  {255, 225, 25}, {0, 130, 200},
                                          {245, 130, 48}, {145, 30, 180}, {70, 240, 240}, {240, 50, 230}};
    cv::Mat canvas = rgb.clone();
    for (std::size_t i = 0; i < result.entities.size(); ++i) {
        const auto& e = result.entities[i];
        const cv::Scalar color = kPalette[i % std::size(kPalette)];
        const cv::Point tl(static_cast<int>(std::floor(e.box.x_min)), static_cast<int>(std::floor(e.box.y_min)));
        const cv::Point br(static_cast<int>(std::ceil(e.box.x_max)) - 1, static_cast<int>(std::ceil(e.box.y_max)) - 1);
        if (e.mask && e.mask->width() == canvas.cols && e.mask->height() == canvas.rows) {
            const auto bits = e.mask->to_bitmap();
            cv::Mat tint(canvas.size(), canvas.type(), color);
            cv::Mat blended;
            cv::addWeighted(canvas, 0.5, tint, 0.5, 0.0, blended);
            const cv::Mat m(canvas.rows, canvas.cols, CV_8UC1, const_cast<std::uint8_t*>(bits.data()));
            blended.copyTo(canvas, m);
        } else {
            cv::rectangle(canvas, tl, br, color, 1);
        }
        cv::putText(canvas, e.label, cv::Point(tl.x + 1, std::max(tl.y + 10, 10)), cv::FONT_HERSHEY_PLAIN, 0.8, color, 1);
    }
    return media::encode_png(canvas);
}

GroundingAdapters make_mock_adapters(std::shared_ptr<const MockTable> table, MockSegmenter::Mode mode) {
    return {std::make_shared<MockTagger>(table), std::make_shared<MockDetector>(table),
            std::make_shared<MockSegmenter>(mode), std::make_shared<MockMatcherLLM>()};
}

} // namespace groundchat::grounding
