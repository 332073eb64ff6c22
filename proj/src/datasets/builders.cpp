#include "groundchat/datasets/builders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "groundchat/error.hpp"
#include "groundchat/prompting/prompt.hpp"

namespace groundchat::datasets {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (auto at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
        s.replace(at, from.size(), to);
    }
    return s;
}

const std::set<std::string, std::less<>>& stop_words() {
    static const std::set<std::string, std::less<>> words = {
        "about", "after", "again", "also", "along", "been", "before", "being", "from", "have", "into", "just",
        "more", "most", "much", "only", "other", "over", "some", "someone", "something", "than", "that", "their",
        "them", "then", "there", "they", "this", "very", "were", "what", "when", "where", "which", "while", "with",
        "would", "could", "might", "sound", "sounds", "heard", "hear", "audio", "clip", "background"};
    return words;
}

std::string stem(std::string w) {
    for (std::string_view suffix : {"ing", "ed", "es", "s"}) {
        if (w.size() > suffix.size() + 3 && w.ends_with(suffix)) {
            w.resize(w.size() - suffix.size());
            break;
        }
    }
    return w;
}

// Lowercases the first letter unless the word looks like an acronym.
std::string lower_first(std::string_view s) {
    std::string out(s);
    if (out.size() >= 2 && std::isupper(static_cast<unsigned char>(out[0])) &&
        std::isupper(static_cast<unsigned char>(out[1]))) {
        return out;
    }
    if (!out.empty()) out[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[0])));
    return out;
}

std::string with_period(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || s.back() == ',' || s.back() == ';')) {
        s.remove_suffix(1);
        s = trim(s);
    }
    return std::string(s) + ".";
}

std::string normalize_caption(std::string_view caption, std::string_view prefix, std::string_view lead) {
    const auto c = trim(caption);
    if (c.empty()) throw PreconditionError("caption must be non-empty", "dataset");
    if (istarts_with(c, prefix) && (c.size() == prefix.size() || c[prefix.size()] == ' ')) {
        return with_period(std::string(prefix) + std::string(c.substr(prefix.size())));
    }
    return with_period(std::string(lead) + " " + lower_first(c));
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
    std::size_t n = 0;
    for (auto at = s.find(needle); at != std::string_view::npos; at = s.find(needle, at + 1)) ++n;
    return n;
}

constexpr std::string_view kLabelTemplates[] = {
    "The sound of {label} can be heard in this scene.",
    "The {label} in the picture is making the sound.",
    "What you hear is {label}, and its source is visible in the image.",
    "This audio clip captures {label} coming from the scene shown.",
    "The noise comes from {label} in the image.",
    "You can hear {label}; the source appears in the picture.",
};

const FewShotExample kFewShot[] = {
    {{"Water is running from a faucet into a sink.", "Someone fills a glass with water from a tap.",
      "A stream of water splashes into a metal basin.", "Water pours steadily and then stops.",
      "A kitchen tap is turned on and water flows."},
     "Water is flowing from a kitchen tap into a metal sink. Someone may be filling a glass or rinsing dishes, "
     "since the stream splashes steadily against the basin before the tap is finally turned off and the pouring "
     "stops."},
    {{"Birds are chirping while cars pass by.", "Traffic moves along a road as birds sing.",
      "Several vehicles drive past on a busy street.", "Small birds call to each other near a road.",
      "Cars rush by and birds tweet in the trees."},
     "Birds are singing in the trees beside a busy road. Between their calls, several cars and other vehicles "
     "rush past, suggesting a street scene where nature and traffic share the same space on an ordinary day."},
};

} // namespace

const std::string_view kDescriptionPromptTemplate =
    "Rewrite the short captions of one audio clip into a single descriptive paragraph of about fifty words. "
    "Cover what the captions agree on, mention plausible alternatives where they disagree, and do not invent "
    "sounds that no caption supports. Answer with the paragraph only.\n\n{examples}Captions:\n{captions}"
    "Description:";

std::span<const FewShotExample> default_few_shot() { return kFewShot; }

std::vector<std::string> keywords(std::string_view text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.size() >= 4 && !stop_words().contains(word)) {
            auto s = stem(word);
            if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
        }
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalpha(c)) word += static_cast<char>(std::tolower(c));
        else flush();
    }
    flush();
    return out;
}

Coverage caption_coverage(std::span<const std::string> captions, std::string_view description) {
    const auto desc = keywords(description);
    Coverage c;
    for (const auto& caption : captions) {
        const auto kw = keywords(caption);
        const bool hit = std::any_of(kw.begin(), kw.end(),
                                     [&](const std::string& k) { return std::find(desc.begin(), desc.end(), k) != desc.end(); });
        if (hit) ++c.covered;
    }
    c.fraction = captions.empty() ? 0.0 : static_cast<double>(c.covered) / static_cast<double>(captions.size());
    return c;
}

std::vector<std::string> check_description(std::span<const std::string> captions, std::string_view description,
                                           const DescriptionChecks& checks) {
    std::vector<std::string> out;
    const auto text = trim(description);
    if (text.empty()) {
        out.emplace_back("empty description");
        return out;
    }
    if (text.find('\n') != std::string_view::npos) out.emplace_back("not a single paragraph");
    const auto words = word_count(text);
    if (words < checks.min_words) {
        out.push_back("too short: " + std::to_string(words) + " words < " + std::to_string(checks.min_words));
    }
    const auto cov = caption_coverage(captions, text);
    if (cov.covered < checks.min_covered_captions) {
        out.push_back("covers " + std::to_string(cov.covered) + " captions < " +
                      std::to_string(checks.min_covered_captions));
    }
    return out;
}

std::string render_description_prompt(std::string_view prompt_template, std::span<const FewShotExample> examples,
                                      std::span<const std::string> captions) {
    auto list = [](std::span<const std::string> cs) {
        std::string s;
        for (std::size_t i = 0; i < cs.size(); ++i) s += std::to_string(i + 1) + ". " + cs[i] + "\n";
        return s;
    };
    std::string shots;
    for (const auto& e : examples) shots += "Captions:\n" + list(e.captions) + "Description: " + e.description + "\n\n";
    std::string out(prompt_template);
    out = replace_all(out, "{examples}", shots);
    out = replace_all(out, "{captions}", list(captions));
    return out;
}

DescriptionBuild build_clotho_detail(std::span<const CaptionBundle> bundles, const grounding::TextLLMAdapter& llm,
                                     std::span<const FewShotExample> few_shot, std::string_view prompt_template,
                                     const DescriptionChecks& checks) {
    if (prompt_template.find("{captions}") == std::string_view::npos) {
        throw ConfigError("description prompt template needs a {captions} placeholder", "dataset");
    }
    DescriptionBuild build;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const auto& b = bundles[i];
        if (const auto v = validate_bundle(b); !v.empty()) {
            build.flagged.push_back({i, "invalid bundle: " + v.front()});
            continue;
        }
        const std::string prompt = render_description_prompt(prompt_template, few_shot, b.captions);
        std::string reason;
        std::optional<std::string> accepted;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            ++build.llm_calls;
            std::string reply;
            try {
                reply = llm.complete({}, prompt);
            } catch (const std::exception& e) {
                reason = std::string("llm failure: ") + e.what();
                continue;
            }
            const auto problems = check_description(b.captions, reply, checks);
            if (problems.empty()) accepted = std::move(reply);
            else reason = problems.front();
        }
        if (!accepted) {
            build.flagged.push_back({i, reason});
            continue;
        }
        const double coverage = caption_coverage(b.captions, *accepted).fraction;
        build.items.push_back({b.audio, std::move(*accepted), b.source_id, coverage});
    }
    return build;
}

std::span<const std::string_view> default_label_templates() { return kLabelTemplates; }

void validate_templates(std::span<const std::string> templates) {
    if (templates.empty()) throw ConfigError("at least one label template is required", "dataset");
    for (const auto& t : templates) {
        if (t.find("{label}") == std::string::npos) {
            throw ConfigError("label template lacks a {label} placeholder: " + t, "dataset");
        }
    }
}

std::string fill_template(std::string_view tmpl, std::string_view label) {
    return replace_all(std::string(tmpl), "{label}", label);
}

std::vector<InstructionSample> build_vggss_instructions(std::span<const LabeledPair> pairs,
                                                        std::span<const std::string> templates, std::uint64_t seed) {
    validate_templates(templates);
    const auto family = prompting::localization_family();
    std::mt19937_64 rng(seed);
    const std::size_t t0 = rng() % templates.size();
    const std::size_t i0 = rng() % family.size();
    std::vector<InstructionSample> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        const auto label = trim(p.label);
        if (label.empty()) throw PreconditionError("pair " + std::to_string(i) + " has an empty label", "dataset");
        InstructionSample s;
        s.audio = p.audio;
        s.image = p.image;
        s.instruction = std::string(family[(i0 + i) % family.size()]);
        s.response = fill_template(templates[(t0 + i) % templates.size()], label);
        s.related = true;
        out.push_back(std::move(s));
    }
    return out;
}

std::string normalize_image_caption(std::string_view caption) {
    return normalize_caption(caption, "The image", "The image shows");
}

std::string normalize_audio_caption(std::string_view caption) {
    return normalize_caption(caption, "The audio", "The audio is");
}

bool has_negative_pair_structure(std::string_view response) {
    if (!response.starts_with("The image")) return false;
    if (count_occurrences(response, "The audio") != 1) return false;
    const auto at = response.find("The audio");
    return at >= 2 && response.substr(at - 2, 2) == ". ";
}

std::vector<InstructionSample> build_negative_pairs(std::span<const CaptionRecord> audio_pool,
                                                    std::span<const CaptionRecord> image_pool, std::size_t count,
                                                    std::uint64_t seed, const NegativePairOptions& options) {
    if (audio_pool.empty() || image_pool.empty()) throw PreconditionError("negative pairs need two non-empty pools", "dataset");
    if (count == 0) throw PreconditionError("count must be at least 1", "dataset");
    for (const auto& a : audio_pool) {
        if (a.media.kind != ModalityKind::audio) throw PreconditionError("audio pool holds a non-audio item", "dataset");
    }
    for (const auto& im : image_pool) {
        if (im.media.kind != ModalityKind::image) throw PreconditionError("image pool holds a non-image item", "dataset");
    }
    const auto family = prompting::relatedness_family();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_audio(0, audio_pool.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_image(0, image_pool.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_instruction(0, family.size() - 1);
    std::vector<InstructionSample> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        bool drawn = false;
        for (std::size_t attempt = 0; attempt < options.max_attempts_per_sample && !drawn; ++attempt) {
            const auto& a = audio_pool[pick_audio(rng)];
            const auto& im = image_pool[pick_image(rng)];
            if (!a.source_id.empty() && a.source_id == im.source_id) continue;
            if (trim(a.caption).empty() || trim(im.caption).empty()) continue;
            std::string response = normalize_image_caption(im.caption) + " " + normalize_audio_caption(a.caption);
            if (!has_negative_pair_structure(response)) continue;
            InstructionSample s;
            s.image = im.media;
            s.audio = a.media;
            s.instruction = std::string(family[pick_instruction(rng)]);
            s.response = std::move(response);
            s.related = false;
            out.push_back(std::move(s));
            drawn = true;
        }
        if (!drawn) {
            throw PreconditionError("could not draw negative pair " + std::to_string(n) + " within " +
                                        std::to_string(options.max_attempts_per_sample) + " attempts",
                                    "dataset");
        }
    }
    return out;
}

std::vector<InstructionSample> mix_stage2(std::span<const InstructionSample> positives,
                                          std::span<const InstructionSample> negatives, double ratio,
                                          std::uint64_t seed) {
    if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw ConfigError("mixing ratio must be >= 0", "dataset");
    const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(positives.size())));
    const std::size_t take = std::min(wanted, negatives.size());
    std::vector<InstructionSample> out(positives.begin(), positives.end());
    out.insert(out.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(take));
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

training::TrainingExample resolve_example(const InstructionSample& sample, const MediaStore& store) {
    if (const auto v = validate_sample(sample); !v.empty()) throw PreconditionError("invalid sample: " + v.front(), "dataset");
    training::TrainingExample ex;
    if (sample.image) ex.image = store.get(*sample.image);
    if (sample.audio) ex.audio = store.get(*sample.audio);
    ex.instruction = sample.instruction;
    ex.response = sample.response;
    ex.related = sample.related;
    return ex;
}

training::CaptionPair resolve_caption(const CaptionRecord& record, const MediaStore& store) {
    if (trim(record.caption).empty()) throw PreconditionError("caption must be non-empty", "dataset");
    return {store.get(record.media), record.caption};
}

} // namespace groundchat::datasets
