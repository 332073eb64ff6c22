#include "groundchat/datasets/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "groundchat/core/digest.hpp"
#include "groundchat/core/serialization.hpp"
#include "groundchat/error.hpp"

namespace groundchat::datasets {

namespace fs = std::filesystem;

namespace {

template <class T>
T field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field: ") + key, "dataset");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad field ") + key + ": " + e.what(), "dataset");
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string(), "dataset");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr ReferenceCount kReference[] = {
    {"wavcaps", 403050, 1},
    {"wavcaps-freesound", 262300, 1},
    {"wavcaps-bbc-sound-effects", 31201, 1},
    {"wavcaps-soundbible", 1231, 1},
    {"wavcaps-audioset-strong", 108317, 1},
    {"minigpt4-align", 3439, 1},
    {"llava-instruct", 158000, 1000},
    {"llava-conversation", 58000, 1000},
    {"llava-detail", 23000, 1000},
    {"llava-reasoning", 77000, 1000},
    {"clotho-detail", 3938, 1},
    {"vggss-instruction", 5158, 1},
};

bool counts_agree(std::size_t actual, const ReferenceCount& ref) {
    if (ref.rounding <= 1) return actual == ref.count;
    const auto rounded = (actual + ref.rounding / 2) / ref.rounding * ref.rounding;
    return rounded == ref.count;
}

} // namespace

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::image_text: return "image_text";
    case DatasetKind::audio_text: return "audio_text";
    case DatasetKind::audio_image_text: return "audio_image_text";
    }
    return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view text) {
    if (text == "image_text") return DatasetKind::image_text;
    if (text == "audio_text") return DatasetKind::audio_text;
    if (text == "audio_image_text") return DatasetKind::audio_image_text;
    throw FormatError("unknown dataset kind: " + std::string(text), "dataset");
}

std::vector<std::string> validate_bundle(const CaptionBundle& b) {
    std::vector<std::string> out;
    if (b.audio.kind != ModalityKind::audio) out.emplace_back("audio: reference must be audio");
    if (b.audio.digest.empty()) out.emplace_back("audio: digest required");
    if (b.captions.size() != kCaptionsPerBundle) out.emplace_back("captions: exactly 5 required");
    for (std::size_t i = 0; i < b.captions.size(); ++i) {
        if (b.captions[i].empty()) out.push_back("captions[" + std::to_string(i) + "]: non-empty required");
    }
    return out;
}

void to_json(Json& j, const CaptionRecord& r) {
    j = Json{{"media", r.media}, {"caption", r.caption}, {"source_id", r.source_id}};
}

void from_json(const Json& j, CaptionRecord& r) {
    r.media = field<MediaRef>(j, "media");
    r.caption = field<std::string>(j, "caption");
    r.source_id = j.value("source_id", std::string{});
}

void to_json(Json& j, const CaptionBundle& b) {
    j = Json{{"audio", b.audio}, {"captions", b.captions}, {"source_id", b.source_id}};
}

void from_json(const Json& j, CaptionBundle& b) {
    b.audio = field<MediaRef>(j, "audio");
    b.captions = field<std::vector<std::string>>(j, "captions");
    b.source_id = j.value("source_id", std::string{});
}

void to_json(Json& j, const LabeledPair& p) {
    j = Json{{"audio", p.audio}, {"image", p.image}, {"label", p.label}, {"source_id", p.source_id}};
}

void from_json(const Json& j, LabeledPair& p) {
    p.audio = field<MediaRef>(j, "audio");
    p.image = field<MediaRef>(j, "image");
    p.label = field<std::string>(j, "label");
    p.source_id = j.value("source_id", std::string{});
}

void to_json(Json& j, const DescribedAudio& d) {
    j = Json{{"audio", d.audio}, {"description", d.description}, {"source_id", d.source_id}, {"coverage", d.coverage}};
}

void from_json(const Json& j, DescribedAudio& d) {
    d.audio = field<MediaRef>(j, "audio");
    d.description = field<std::string>(j, "description");
    d.source_id = j.value("source_id", std::string{});
    d.coverage = j.value("coverage", 0.0);
}

void to_json(Json& j, const DatasetManifest& m) {
    j = Json{{"schema_version", m.schema_version}, {"name", m.name},       {"kind", to_string(m.kind)},
             {"record_type", m.record_type},       {"count", m.count},     {"sources", m.sources},
             {"records_file", m.records_file},     {"checksum", m.checksum}};
}

void from_json(const Json& j, DatasetManifest& m) {
    m.schema_version = field<int>(j, "schema_version");
    if (m.schema_version != kSchemaVersion) {
        throw FormatError("unsupported manifest schema_version " + std::to_string(m.schema_version), "dataset");
    }
    m.name = field<std::string>(j, "name");
    m.kind = parse_dataset_kind(field<std::string>(j, "kind"));
    m.record_type = field<std::string>(j, "record_type");
    m.count = field<std::size_t>(j, "count");
    m.sources = j.value("sources", std::vector<std::string>{});
    m.records_file = field<std::string>(j, "records_file");
    m.checksum = field<std::string>(j, "checksum");
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string(), "dataset");
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw InputError("write failed for " + path.string(), "dataset");
}

std::vector<Json> read_jsonl(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string(), "dataset");
    std::vector<Json> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(Json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what(), "dataset");
        }
    }
    return out;
}

fs::path write_dataset(const fs::path& dir, DatasetManifest manifest, const std::vector<Json>& records) {
    if (manifest.name.empty()) throw PreconditionError("dataset name required", "dataset");
    fs::create_directories(dir);
    manifest.schema_version = kSchemaVersion;
    manifest.records_file = manifest.name + ".jsonl";
    manifest.count = records.size();
    const fs::path records_path = dir / manifest.records_file;
    write_jsonl(records_path, records);
    manifest.checksum = sha256_hex(read_file(records_path));
    const fs::path manifest_path = dir / (manifest.name + ".manifest.json");
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw InputError("cannot write " + manifest_path.string(), "dataset");
    out << Json(manifest).dump(2) << '\n';
    return manifest_path;
}

LoadedDataset load_dataset(const fs::path& manifest_path) {
    LoadedDataset ds;
    try {
        ds.manifest = Json::parse(read_file(manifest_path)).get<DatasetManifest>();
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(manifest_path.string() + ": " + e.what(), "dataset");
    }
    const fs::path records_path = manifest_path.parent_path() / ds.manifest.records_file;
    const std::string bytes = read_file(records_path);
    if (sha256_hex(bytes) != ds.manifest.checksum) {
        throw FormatError("checksum mismatch for " + records_path.string(), "dataset");
    }
    ds.records = read_jsonl(records_path);
    if (ds.records.size() != ds.manifest.count) {
        throw FormatError("manifest count " + std::to_string(ds.manifest.count) + " but " +
                              std::to_string(ds.records.size()) + " records",
                          "dataset");
    }
    return ds;
}

MediaStore::MediaStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path MediaStore::path_of(const MediaRef& ref) const {
    if (ref.digest.size() < 2) throw FormatError("media digest too short", "media-store");
    return root_ / ref.digest.substr(0, 2) / (ref.digest + "." + std::string(groundchat::to_string(ref.format)));
}

MediaRef MediaStore::put(const ModalityInput& input) {
    const MediaRef ref = MediaRef::of(input);
    const fs::path path = path_of(ref);
    if (fs::exists(path)) return ref;
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(input.payload().data()),
                  static_cast<std::streamsize>(input.payload().size()));
        if (!out) throw InputError("cannot write " + tmp.string(), "media-store");
    }
    fs::rename(tmp, path);
    return ref;
}

bool MediaStore::contains(const MediaRef& ref) const { return fs::exists(path_of(ref)); }

ModalityInput MediaStore::get(const MediaRef& ref) const {
    const fs::path path = path_of(ref);
    if (!fs::exists(path)) throw NotFoundError("media " + ref.digest + " not in store", "media-store");
    const std::string bytes = read_file(path);
    ModalityInput input(ref.kind, ref.format, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    if (input.digest() != ref.digest) throw FormatError("media " + ref.digest + " is corrupt", "media-store");
    return input;
}

std::span<const ReferenceCount> reference_counts() { return kReference; }

std::optional<ReferenceCount> find_reference(std::string_view name) {
    for (const auto& r : kReference) {
        if (r.name == name) return r;
    }
    return std::nullopt;
}

bool ValidationReport::pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const ReportEntry& e) { return e.pass; });
}

std::string ValidationReport::to_text() const {
    std::ostringstream out;
    out << "dataset " << name << '\n';
    for (const auto& e : entries) {
        out << "  [" << (e.pass ? "ok" : "MISMATCH") << "] " << e.check << ": expected " << e.expected << ", got "
            << e.actual << '\n';
    }
    return out.str();
}

Json ValidationReport::to_json() const {
    Json j = {{"schema_version", kSchemaVersion}, {"name", name}, {"pass", pass()}, {"entries", Json::array()}};
    for (const auto& e : entries) {
        j["entries"].push_back({{"check", e.check}, {"expected", e.expected}, {"actual", e.actual}, {"pass", e.pass}});
    }
    return j;
}

namespace {

std::vector<std::string> record_violations(const DatasetManifest& m, const Json& r) {
    try {
        if (m.record_type == "instruction") {
            const auto s = r.get<InstructionSample>();
            auto v = validate_sample(s);
            if (m.kind == DatasetKind::audio_image_text && (!s.image || !s.audio)) {
                v.emplace_back("audio_image_text samples need both modalities");
            }
            return v;
        }
        if (m.record_type == "caption") {
            const auto c = r.get<CaptionRecord>();
            std::vector<std::string> v;
            if (c.caption.empty()) v.emplace_back("caption: non-empty required");
            const auto want = m.kind == DatasetKind::audio_text ? ModalityKind::audio : ModalityKind::image;
            if (c.media.kind != want) v.emplace_back("media: kind inconsistent with dataset kind");
            return v;
        }
        if (m.record_type == "bundle") return validate_bundle(r.get<CaptionBundle>());
        if (m.record_type == "pair") {
            const auto p = r.get<LabeledPair>();
            std::vector<std::string> v;
            if (p.label.empty()) v.emplace_back("label: non-empty required");
            if (p.audio.kind != ModalityKind::audio || p.image.kind != ModalityKind::image) {
                v.emplace_back("pair: needs one audio and one image reference");
            }
            return v;
        }
        if (m.record_type == "described") {
            const auto d = r.get<DescribedAudio>();
            if (d.description.empty()) return {"description: non-empty required"};
            return {};
        }
    } catch (const Error& e) {
        return {e.what()};
    } catch (const nlohmann::json::exception& e) {
        return {e.what()};
    }
    return {"unknown record_type " + m.record_type};
}

} // namespace

ValidationReport validate_manifest(const DatasetManifest& manifest, std::optional<std::size_t> expected,
                                   const std::vector<Json>* records) {
    ValidationReport report;
    report.name = manifest.name;
    if (!expected) {
        if (auto ref = find_reference(manifest.name)) {
            report.entries.push_back({"count", std::to_string(ref->count), std::to_string(manifest.count),
                                      counts_agree(manifest.count, *ref)});
        }
    } else {
        report.entries.push_back(
            {"count", std::to_string(*expected), std::to_string(manifest.count), manifest.count == *expected});
    }
    report.entries.push_back({"count positive", "> 0", std::to_string(manifest.count), manifest.count > 0});
    if (records) {
        std::size_t bad = 0;
        std::string first;
        for (std::size_t i = 0; i < records->size(); ++i) {
            const auto v = record_violations(manifest, (*records)[i]);
            if (!v.empty()) {
                if (bad == 0) first = "record " + std::to_string(i) + ": " + v.front();
                ++bad;
            }
        }
        report.entries.push_back({"valid records", std::to_string(records->size()),
                                  std::to_string(records->size() - bad) + (first.empty() ? "" : " (" + first + ")"),
                                  bad == 0});
    }
    return report;
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

double RawCorpus::mean_words() const {
    if (texts.empty()) return 0.0;
    double total = 0.0;
    for (const auto& t : texts) total += static_cast<double>(word_count(t));
    return total / static_cast<double>(texts.size());
}

namespace {

std::optional<std::string> item_text(const Json& item) {
    if (item.is_string()) return item.get<std::string>();
    if (!item.is_object()) return std::nullopt;
    for (const char* key : {"description", "caption", "text", "response"}) {
        if (item.contains(key) && item.at(key).is_string()) return item.at(key).get<std::string>();
    }
    if (item.contains("conversations") && item.at("conversations").is_array()) {
        std::optional<std::string> last;
        for (const auto& turn : item.at("conversations")) {
            if (!turn.is_object()) continue;
            const std::string who = turn.value("from", std::string{});
            if ((who == "gpt" || who == "assistant") && turn.contains("value") && turn.at("value").is_string()) {
                last = turn.at("value").get<std::string>();
            }
        }
        return last;
    }
    return std::nullopt;
}

} // namespace

RawCorpus load_raw_corpus(const fs::path& path) {
    Json root;
    try {
        root = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + " is not valid JSON: " + e.what(), "dataset");
    }
    const Json* items = nullptr;
    if (root.is_array()) {
        items = &root;
    } else if (root.is_object()) {
        for (const char* key : {"annotations", "data", "items"}) {
            if (root.contains(key) && root.at(key).is_array()) {
                items = &root.at(key);
                break;
            }
        }
    }
    if (!items) throw FormatError(path.string() + ": no item array found", "dataset");
    RawCorpus corpus;
    corpus.count = items->size();
    for (const auto& item : *items) {
        if (auto text = item_text(item)) corpus.texts.push_back(std::move(*text));
    }
    return corpus;
}

ValidationReport validate_raw_corpus(std::string_view name, const RawCorpus& corpus) {
    ValidationReport report;
    report.name = std::string(name);
    const auto ref = find_reference(name);
    if (!ref) throw NotFoundError("no reference entry for dataset " + std::string(name), "dataset");
    report.entries.push_back(
        {"count", std::to_string(ref->count), std::to_string(corpus.count), counts_agree(corpus.count, *ref)});
    if (name == "clotho-detail") {
        char expected[64];
        char actual[64];
        std::snprintf(expected, sizeof expected, "%.2f +/- %.2f", kClothoDetailMeanWords, kClothoDetailMeanTolerance);
        const double mean = corpus.mean_words();
        std::snprintf(actual, sizeof actual, "%.2f", mean);
        report.entries.push_back({"mean description words", expected, actual,
                                  std::abs(mean - kClothoDetailMeanWords) <= kClothoDetailMeanTolerance});
    }
    return report;
}

} // namespace groundchat::datasets
