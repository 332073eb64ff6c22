#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "groundchat/core/types.hpp"

namespace groundchat::grounding {

struct Detection {
    std::string label;
    BoundingBox box;
    double score = 0.0;

    bool operator==(const Detection&) const = default;
};

/// Image tagger (RAM-style). `rgb` is the decoded image of `image`.
class TaggerAdapter {
  public:
    virtual ~TaggerAdapter() = default;
    virtual std::string id() const = 0;
    virtual std::vector<Tag> tag(const ModalityInput& image, const cv::Mat& rgb) const = 0;
};

/// Open-set detector prompted by a comma-joined label query.
class DetectorAdapter {
  public:
    virtual ~DetectorAdapter() = default;
    virtual std::string id() const = 0;
    virtual std::vector<Detection> detect(const ModalityInput& image, const cv::Mat& rgb,
                                          std::string_view query) const = 0;
};

/// Box-prompted segmenter. Masks must have the image's dimensions.
class SegmenterAdapter {
  public:
    virtual ~SegmenterAdapter() = default;
    virtual std::string id() const = 0;
    virtual SegmentMask segment(const ModalityInput& image, const cv::Mat& rgb, const BoundingBox& box) const = 0;
};

/// Text-only LLM used for entity matching and dataset construction.
class TextLLMAdapter {
  public:
    virtual ~TextLLMAdapter() = default;
    virtual std::string id() const = 0;
    virtual std::string complete(std::string_view system, std::string_view user) const = 0;
};

/// Shared on/off switch for the mocks; a switched-off mock throws
/// AdapterError so outage paths can be exercised.
class Availability {
  public:
    void set_available(bool on) { available_.store(on); }
    bool available() const { return available_.load(); }

  protected:
    void require(std::string_view who) const;

  private:
    std::atomic<bool> available_{true};
};

/// Fixture table keyed by image digest:
///   {"tags": {digest: [{"label", "score"}]},
///    "detections": {digest: [{"label", "box": [x0, y0, x1, y1], "score"}]},
///    "replies": {digest: "text"}}
/// Missing digests behave like a blank image.
struct MockTable {
    std::map<std::string, std::vector<Tag>> tags;
    std::map<std::string, std::vector<Detection>> detections;
    std::map<std::string, std::string> replies;

    static MockTable from_json(const nlohmann::json& j);
    static MockTable load(const std::string& path);
    nlohmann::json to_json() const;
};

class MockTagger final : public TaggerAdapter, public Availability {
  public:
    explicit MockTagger(std::shared_ptr<const MockTable> table) : table_(std::move(table)) {}
    std::string id() const override { return "mock-tagger"; }
    std::vector<Tag> tag(const ModalityInput& image, const cv::Mat& rgb) const override;

  private:
    std::shared_ptr<const MockTable> table_;
};

/// Returns the table's detections whose label appears in the query.
class MockDetector final : public DetectorAdapter, public Availability {
  public:
    explicit MockDetector(std::shared_ptr<const MockTable> table) : table_(std::move(table)) {}
    std::string id() const override { return "mock-detector"; }
    std::vector<Detection> detect(const ModalityInput& image, const cv::Mat& rgb, std::string_view query) const override;

  private:
    std::shared_ptr<const MockTable> table_;
};

/// box: every pixel whose center lies in the box.
/// ellipse: pixels whose center lies in the inscribed ellipse.
/// faulty: the box grown by `spill` px on each side, so masks leak.
class MockSegmenter final : public SegmenterAdapter, public Availability {
  public:
    enum class Mode { box, ellipse, faulty };
    explicit MockSegmenter(Mode mode = Mode::box, int spill = 6) : mode_(mode), spill_(spill) {}
    std::string id() const override;
    SegmentMask segment(const ModalityInput& image, const cv::Mat& rgb, const BoundingBox& box) const override;

    static Mode parse_mode(std::string_view text);

  private:
    Mode mode_;
    int spill_;
};

/// Pixel-center rasterization shared with the segmenter mocks.
SegmentMask rasterize_box(int width, int height, const BoundingBox& box);
SegmentMask rasterize_ellipse(int width, int height, const BoundingBox& box);

/// Reads the `<List>..</List>,<Text>..</Text>` payload and emits one
/// `label -> surface` line per label found in the text (first,
/// case-insensitive occurrence; the surface keeps the text's casing).
class MockMatcherLLM final : public TextLLMAdapter, public Availability {
  public:
    std::string id() const override { return "mock-matcher"; }
    std::string complete(std::string_view system, std::string_view user) const override;
};

/// Returns a fixed reply, or the reply whose key occurs in the user prompt.
class ScriptedTextLLM final : public TextLLMAdapter, public Availability {
  public:
    explicit ScriptedTextLLM(std::string fallback, std::vector<std::pair<std::string, std::string>> keyed = {})
        : fallback_(std::move(fallback)), keyed_(std::move(keyed)) {}
    std::string id() const override { return "scripted-llm"; }
    std::string complete(std::string_view system, std::string_view user) const override;
    std::size_t calls() const { return calls_.load(); }

  private:
    std::string fallback_;
    std::vector<std::pair<std::string, std::string>> keyed_;
    mutable std::atomic<std::size_t> calls_{0};
};

/// Deterministic stand-in for a description writer: reads the numbered
/// captions after the last "Captions:" line and stitches them into one
/// paragraph.
class CaptionMergeLLM final : public TextLLMAdapter, public Availability {
  public:
    std::string id() const override { return "caption-merge"; }
    std::string complete(std::string_view system, std::string_view user) const override;
};

} // namespace groundchat::grounding
