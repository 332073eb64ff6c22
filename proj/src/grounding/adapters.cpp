#include "groundchat/grounding/adapters.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "groundchat/core/serialization.hpp"
#include "groundchat/error.hpp"

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

// Text between the first `open` and the following `close`.
std::optional<std::string_view> between(std::string_view s, std::string_view open, std::string_view close) {
    const auto a = s.find(open);
    if (a == std::string_view::npos) return std::nullopt;
    const auto from = a + open.size();
    const auto b = s.find(close, from);
    if (b == std::string_view::npos) return std::nullopt;
    return s.substr(from, b - from);
}

} // namespace

void Availability::require(std::string_view who) const {
    if (!available()) throw AdapterError(std::string(who) + " is unavailable");
}

MockTable MockTable::from_json(const nlohmann::json& j) {
    MockTable t;
    try {
        if (!j.is_object()) throw FormatError("mock table must be an object", "mocks");
        for (const auto& [key, _] : j.items()) {
            if (key != "tags" && key != "detections" && key != "replies") {
                throw FormatError("unknown mock table key: " + key, "mocks");
            }
        }
        if (j.contains("tags")) {
            for (const auto& [digest, list] : j.at("tags").items()) {
                auto& out = t.tags[digest];
                for (const auto& e : list) out.push_back({e.at("label").get<std::string>(), e.at("score").get<double>()});
            }
        }
        if (j.contains("detections")) {
            for (const auto& [digest, list] : j.at("detections").items()) {
                auto& out = t.detections[digest];
                for (const auto& e : list) {
                    const auto& b = e.at("box");
                    if (!b.is_array() || b.size() != 4) throw FormatError("detection box needs 4 numbers", "mocks");
                    out.push_back({e.at("label").get<std::string>(),
                                   {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                                   e.at("score").get<double>()});
                }
            }
        }
        if (j.contains("replies")) {
            for (const auto& [digest, text] : j.at("replies").items()) t.replies[digest] = text.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed mock table: ") + e.what(), "mocks");
    }
    return t;
}

MockTable MockTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open mock table " + path, "mocks");
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("mock table " + path + " is not valid JSON: " + e.what(), "mocks");
    }
}

nlohmann::json MockTable::to_json() const {
    nlohmann::json j = {{"tags", nlohmann::json::object()},
                        {"detections", nlohmann::json::object()},
                        {"replies", nlohmann::json::object()}};
    for (const auto& [d, list] : tags) {
        auto& arr = j["tags"][d] = nlohmann::json::array();
        for (const auto& t : list) arr.push_back({{"label", t.label}, {"score", t.score}});
    }
    for (const auto& [d, list] : detections) {
        auto& arr = j["detections"][d] = nlohmann::json::array();
        for (const auto& e : list) {
            arr.push_back({{"label", e.label},
                           {"box", {e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max}},
                           {"score", e.score}});
        }
    }
    for (const auto& [d, text] : replies) j["replies"][d] = text;
    return j;
}

std::vector<Tag> MockTagger::tag(const ModalityInput& image, const cv::Mat&) const {
    require(id());
    const auto it = table_->tags.find(image.digest());
    return it == table_->tags.end() ? std::vector<Tag>{} : it->second;
}

std::vector<Detection> MockDetector::detect(const ModalityInput& image, const cv::Mat&, std::string_view query) const {
    require(id());
    std::vector<std::string> wanted;
    std::string item;
    std::istringstream in{std::string(query)};
    while (std::getline(in, item, ',')) wanted.push_back(lower(trim(item)));
    std::vector<Detection> out;
    const auto it = table_->detections.find(image.digest());
    if (it == table_->detections.end()) return out;
    for (const auto& d : it->second) {
        if (std::find(wanted.begin(), wanted.end(), lower(d.label)) != wanted.end()) out.push_back(d);
    }
    return out;
}

SegmentMask rasterize_box(int width, int height, const BoundingBox& box) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
    for (int y = 0; y < height; ++y) {
        const double cy = y + 0.5;
        if (cy < box.y_min || cy > box.y_max) continue;
        for (int x = 0; x < width; ++x) {
            const double cx = x + 0.5;
            if (cx >= box.x_min && cx <= box.x_max) bits[static_cast<std::size_t>(y) * width + x] = 1;
        }
    }
    return SegmentMask::from_bitmap(width, height, bits);
}

SegmentMask rasterize_ellipse(int width, int height, const BoundingBox& box) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
    const double cx = (box.x_min + box.x_max) / 2.0;
    const double cy = (box.y_min + box.y_max) / 2.0;
    const double a = box.width() / 2.0;
    const double b = box.height() / 2.0;
    if (a <= 0.0 || b <= 0.0) return SegmentMask::from_bitmap(width, height, bits);
    for (int y = 0; y < height; ++y) {
        const double dy = (y + 0.5 - cy) / b;
        for (int x = 0; x < width; ++x) {
            const double dx = (x + 0.5 - cx) / a;
            if (dx * dx + dy * dy <= 1.0) bits[static_cast<std::size_t>(y) * width + x] = 1;
        }
    }
    return SegmentMask::from_bitmap(width, height, bits);
}

std::string MockSegmenter::id() const {
    switch (mode_) {
    case Mode::box: return "mock-segmenter-box";
    case Mode::ellipse: return "mock-segmenter-ellipse";
    case Mode::faulty: return "mock-segmenter-faulty";
    }
    return "mock-segmenter";
}

MockSegmenter::Mode MockSegmenter::parse_mode(std::string_view text) {
    if (text == "box") return Mode::box;
    if (text == "ellipse") return Mode::ellipse;
    if (text == "faulty") return Mode::faulty;
    throw ConfigError("unknown segmenter mode: " + std::string(text), "config");
}

SegmentMask MockSegmenter::segment(const ModalityInput&, const cv::Mat& rgb, const BoundingBox& box) const {
    require(id());
    switch (mode_) {
    case Mode::box: return rasterize_box(rgb.cols, rgb.rows, box);
    case Mode::ellipse: return rasterize_ellipse(rgb.cols, rgb.rows, box);
    case Mode::faulty:
        return rasterize_box(rgb.cols, rgb.rows,
                             {box.x_min - spill_, box.y_min - spill_, box.x_max + spill_, box.y_max + spill_});
    }
    return {};
}

std::string MockMatcherLLM::complete(std::string_view, std::string_view user) const {
    require(id());
    const auto list = between(user, "<List>", "</List>");
    const auto text = between(user, "<Text>", "</Text>");
    if (!list || !text) return {};
    const std::string haystack = lower(*text);
    std::string out;
    std::size_t from = 0;
    while (from <= list->size()) {
        auto comma = list->find(',', from);
        if (comma == std::string_view::npos) comma = list->size();
        const auto label = trim(list->substr(from, comma - from));
        from = comma + 1;
        if (label.empty()) continue;
        const auto at = haystack.find(lower(label));
        if (at == std::string::npos) continue;
        out += std::string(label) + " -> " + std::string(text->substr(at, label.size())) + "\n";
    }
    return out;
}

std::string ScriptedTextLLM::complete(std::string_view, std::string_view user) const {
    require(id());
    ++calls_;
    for (const auto& [key, reply] : keyed_) {
        if (user.find(key) != std::string_view::npos) return reply;
    }
    return fallback_;
}

} // namespace groundchat::grounding

namespace groundchat::grounding {

namespace {

std::string strip_caption(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == '.')) s.remove_suffix(1);
    return std::string(s);
}

std::string lower_first(std::string s) {
    if (s.size() >= 2 && std::isupper(static_cast<unsigned char>(s[1]))) return s;
    if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
}

} // namespace

std::string CaptionMergeLLM::complete(std::string_view, std::string_view user) const {
    require(id());
    const auto at = user.rfind("Captions:\n");
    if (at == std::string_view::npos) return {};
    std::vector<std::string> captions;
    std::istringstream in{std::string(user.substr(at + 10))};
    std::string line;
    while (std::getline(in, line)) {
        const auto dot = line.find(". ");
        if (dot == std::string::npos || dot == 0 ||
            !std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(dot), ::isdigit)) {
            break;
        }
        captions.push_back(strip_caption(std::string_view(line).substr(dot + 2)));
    }
    if (captions.empty()) return {};
    std::string out = captions[0] + ".";
    if (captions.size() > 1) {
        out += " Other listeners describe the same moment as " + lower_first(captions[1]);
        for (std::size_t i = 2; i + 1 < captions.size(); ++i) out += ", " + lower_first(captions[i]);
        if (captions.size() > 2) out += " or " + lower_first(captions.back());
        out += ".";
    }
    out += " Taken together, the recording suggests one continuous everyday scene heard from a single place.";
    return out;
}

} // namespace groundchat::grounding
