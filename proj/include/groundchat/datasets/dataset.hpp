#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "groundchat/core/serialization.hpp"

#include "groundchat/core/types.hpp"

namespace groundchat::datasets {

using Json = nlohmann::json;

enum class DatasetKind { image_text, audio_text, audio_image_text };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

/// One media item with a short caption. `source_id` names the upstream
/// item (video id, clip id) so builders can avoid pairing an item with
/// itself.
struct CaptionRecord {
    MediaRef media;
    std::string caption;
    std::string source_id;
    bool operator==(const CaptionRecord&) const = default;
};

/// An audio clip with its five annotator captions.
struct CaptionBundle {
    MediaRef audio;
    std::vector<std::string> captions;
    std::string source_id;
    bool operator==(const CaptionBundle&) const = default;
};

inline constexpr std::size_t kCaptionsPerBundle = 5;

/// Empty iff the bundle has exactly five non-empty captions and an audio ref.
std::vector<std::string> validate_bundle(const CaptionBundle& bundle);

/// Audio and image from the same clip plus its class label.
struct LabeledPair {
    MediaRef audio;
    MediaRef image;
    std::string label;
    std::string source_id;
    bool operator==(const LabeledPair&) const = default;
};

/// Long description produced from a bundle.
struct DescribedAudio {
    MediaRef audio;
    std::string description;
    std::string source_id;
    double coverage = 0.0; // fraction of source captions represented
    bool operator==(const DescribedAudio&) const = default;
};

void to_json(Json& j, const CaptionRecord& r);
void from_json(const Json& j, CaptionRecord& r);
void to_json(Json& j, const CaptionBundle& b);
void from_json(const Json& j, CaptionBundle& b);
void to_json(Json& j, const LabeledPair& p);
void from_json(const Json& j, LabeledPair& p);
void to_json(Json& j, const DescribedAudio& d);
void from_json(const Json& j, DescribedAudio& d);

/// Header file written next to the records file of a dataset.
struct DatasetManifest {
    int schema_version = 1;
    std::string name;
    DatasetKind kind = DatasetKind::image_text;
    std::string record_type; // caption, bundle, pair, described, instruction
    std::size_t count = 0;
    std::vector<std::string> sources;
    std::string records_file; // relative to the manifest
    std::string checksum;     // sha256 of the records file

    bool operator==(const DatasetManifest&) const = default;
};

void to_json(Json& j, const DatasetManifest& m);
void from_json(const Json& j, DatasetManifest& m);

/// Line-delimited JSON. Reading reports the failing line number.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

/// Writes `<dir>/<name>.jsonl` and `<dir>/<name>.manifest.json`; returns
/// the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, DatasetManifest manifest,
                                    const std::vector<Json>& records);

struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<Json> records;
};

/// Loads and checks count and checksum; throws FormatError on mismatch.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

template <class T>
std::vector<Json> to_records(const std::vector<T>& items) {
    std::vector<Json> out;
    out.reserve(items.size());
    for (const auto& x : items) out.push_back(Json(x));
    return out;
}

template <class T>
std::vector<T> from_records(const std::vector<Json>& records) {
    std::vector<T> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.get<T>());
    return out;
}

/// Content-addressed media directory: `<root>/<d[0:2]>/<d>.<format>`.
class MediaStore {
  public:
    explicit MediaStore(std::filesystem::path root);

    MediaRef put(const ModalityInput& input);
    bool contains(const MediaRef& ref) const;
    /// Re-hashes on load; throws NotFoundError or FormatError.
    ModalityInput get(const MediaRef& ref) const;
    std::filesystem::path path_of(const MediaRef& ref) const;
    const std::filesystem::path& root() const { return root_; }

  private:
    std::filesystem::path root_;
};

/// Reference sizes of the public corpora the toy datasets stand in for.
struct ReferenceCount {
    std::string_view name;
    std::size_t count;
    std::size_t rounding; // counts only published to this granularity
};

std::span<const ReferenceCount> reference_counts();
std::optional<ReferenceCount> find_reference(std::string_view name);

inline constexpr double kClothoDetailMeanWords = 52.70;
inline constexpr double kClothoDetailMeanTolerance = 0.5;

struct ReportEntry {
    std::string check;
    std::string expected;
    std::string actual;
    bool pass = false;
};

struct ValidationReport {
    std::string name;
    std::vector<ReportEntry> entries;
    bool pass() const;
    std::string to_text() const;
    Json to_json() const;
};

/// Compares a manifest's count with `expected` (or the reference table
/// entry of the same name) and, when records are given, checks each one.
ValidationReport validate_manifest(const DatasetManifest& manifest, std::optional<std::size_t> expected = std::nullopt,
                                   const std::vector<Json>* records = nullptr);

/// Text items of a released annotation file. Accepts a top-level array or
/// an object holding one under "annotations", "data" or "items"; the text
/// of each item is the first of "description", "caption", "text",
/// "response" or the last gpt turn of "conversations".
struct RawCorpus {
    std::size_t count = 0;
    std::vector<std::string> texts;
    double mean_words() const;
};

RawCorpus load_raw_corpus(const std::filesystem::path& path);

/// Count (and mean description length for clotho-detail) against the
/// reference table.
ValidationReport validate_raw_corpus(std::string_view name, const RawCorpus& corpus);

std::size_t word_count(std::string_view text);

} // namespace groundchat::datasets
