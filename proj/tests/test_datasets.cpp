#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "groundchat/datasets/builders.hpp"
#include "groundchat/error.hpp"
#include "groundchat/media/synthetic.hpp"
#include "groundchat/prompting/prompt.hpp"
#include "support.hpp"

using namespace groundchat;
using namespace groundchat::datasets;

namespace {

const std::vector<std::string> kMapCaptions = {
    "A person is turning a map over and over.",
    "A person is very carefully wrapping a gift for someone else.",
    "A person is very carefully wrapping a gift for someone else.",
    "He sighed as he turned the pages of the book, stopping to scan the information.",
    "Papers are being turned, stopped, then turned again, and someone is breathing.",
};

const std::string kMapDescription =
    "A person is repeatedly flipping some papers. They might be reading a book, flipping through a map, or wrapping "
    "presents. Judging from the repeated flipping sounds, they are concentrating on repeating this action.";

MediaRef ref(ModalityKind kind, std::uint64_t seed) {
    auto bytes = kind == ModalityKind::image ? media::synthetic_png(seed) : media::synthetic_wav(seed, 0.05);
    return MediaRef::of(ModalityInput::from_bytes(kind, std::move(bytes)));
}

std::size_t oracle_words(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

bool in_family(std::span<const std::string_view> family, const std::string& s) {
    for (auto f : family) {
        if (f == s) return true;
    }
    return false;
}

std::vector<InstructionSample> negatives_seed7() {
    const auto& fx = testing::fixture_set();
    std::vector<CaptionRecord> audio, images;
    for (const auto& a : fx.audios) audio.push_back({MediaRef::of(a.input), a.caption, a.source_id});
    for (const auto& i : fx.images) images.push_back({MediaRef::of(i.input), i.caption, i.source_id});
    return build_negative_pairs(audio, images, 100, 7);
}

} // namespace

TEST_CASE("worked description example is accepted verbatim") {
    grounding::ScriptedTextLLM llm(kMapDescription);
    const std::vector<CaptionBundle> bundles = {{ref(ModalityKind::audio, 1), kMapCaptions, "clip-map"}};
    const auto build = build_clotho_detail(bundles, llm);
    REQUIRE(build.items.size() == 1);
    CHECK(build.flagged.empty());
    CHECK(build.items[0].description == kMapDescription);
    CHECK(build.items[0].source_id == "clip-map");
    CHECK(build.items[0].coverage >= 0.4);
    CHECK(llm.calls() == 1);
}

TEST_CASE("description prompt embeds the examples and the captions") {
    const auto prompt = render_description_prompt(kDescriptionPromptTemplate, default_few_shot(), kMapCaptions);
    for (const auto& c : kMapCaptions) CHECK(prompt.find(c) != std::string::npos);
    for (const auto& ex : default_few_shot()) CHECK(prompt.find(ex.description) != std::string::npos);
    CHECK(prompt.find("{captions}") == std::string::npos);
    CHECK(prompt.find("{examples}") == std::string::npos);
}

TEST_CASE("empty replies are retried once then flagged") {
    grounding::ScriptedTextLLM llm("");
    const std::vector<CaptionBundle> bundles = {{ref(ModalityKind::audio, 1), kMapCaptions, "a"}};
    const auto build = build_clotho_detail(bundles, llm);
    CHECK(build.items.empty());
    REQUIRE(build.flagged.size() == 1);
    CHECK(build.flagged[0].index == 0);
    CHECK(llm.calls() == 2);
    CHECK(build.llm_calls == 2);
}

TEST_CASE("adapter failures and invalid bundles are flagged without stopping the build") {
    grounding::ScriptedTextLLM down(kMapDescription);
    down.set_available(false);
    std::vector<CaptionBundle> bundles = {{ref(ModalityKind::audio, 1), kMapCaptions, "a"},
                                          {ref(ModalityKind::audio, 2), {"only", "four", "short", "captions"}, "b"}};
    auto build = build_clotho_detail(bundles, down);
    CHECK(build.flagged.size() == 2);
    CHECK(down.calls() == 0);

    grounding::ScriptedTextLLM up(kMapDescription);
    bundles.push_back({ref(ModalityKind::audio, 3), kMapCaptions, "c"});
    build = build_clotho_detail(bundles, up);
    REQUIRE(build.items.size() == 2);
    REQUIRE(build.flagged.size() == 1);
    CHECK(build.flagged[0].index == 1);
    CHECK(up.calls() == 2);
}

TEST_CASE("description checks") {
    CHECK(check_description(kMapCaptions, kMapDescription).empty());
    CHECK_FALSE(check_description(kMapCaptions, "A person flips papers.").empty());
    CHECK_FALSE(check_description(kMapCaptions, kMapDescription + "\n\nSecond paragraph here.").empty());
    const std::string unrelated(
        "Waves crash against rocks while seagulls call overhead and wind rushes across an empty beach near a lighthouse "
        "at dusk, with distant boats sounding horns and children laughing somewhere far away on sand dunes.");
    CHECK_FALSE(check_description(kMapCaptions, unrelated).empty());
    CHECK(word_count(kMapDescription) == oracle_words(kMapDescription));
}

TEST_CASE("caption merge writer passes the checks on fixture bundles") {
    grounding::CaptionMergeLLM llm;
    const auto build = build_clotho_detail(testing::fixture_set().bundles, llm);
    CHECK(build.items.size() == testing::fixture_set().bundles.size());
    CHECK(build.flagged.empty());
}

TEST_CASE("label templates") {
    const std::vector<std::string> one = {"The sound of {label} can be heard in this scene."};
    const std::vector<LabeledPair> pair = {{ref(ModalityKind::audio, 1), ref(ModalityKind::image, 1), "dog barking", "v1"}};
    const auto s = build_vggss_instructions(pair, one, 0);
    REQUIRE(s.size() == 1);
    CHECK(s[0].response == "The sound of dog barking can be heard in this scene.");
    CHECK(s[0].related);
    CHECK(in_family(prompting::localization_family(), s[0].instruction));
    const std::vector<std::string> bad = {"No placeholder here."};
    CHECK_THROWS_AS(build_vggss_instructions(pair, bad, 0), ConfigError);
    CHECK_THROWS_AS(build_vggss_instructions(pair, {}, 0), ConfigError);
}

TEST_CASE("label-wrapped instructions form a bijection with the pairs") {
    const auto& pairs = testing::fixture_set().pairs;
    std::vector<std::string> templates;
    for (auto t : default_label_templates()) templates.emplace_back(t);
    const auto samples = build_vggss_instructions(pairs, templates, 3);
    REQUIRE(samples.size() == pairs.size());
    std::set<std::pair<std::string, std::string>> from_pairs, from_samples;
    for (const auto& p : pairs) from_pairs.insert({p.audio.digest, p.image.digest});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        REQUIRE(s.audio);
        REQUIRE(s.image);
        from_samples.insert({s.audio->digest, s.image->digest});
        CHECK(s.response.find(pairs[i].label) != std::string::npos);
        CHECK(validate_sample(s).empty());
        CHECK(in_family(prompting::localization_family(), s.instruction));
    }
    CHECK(from_pairs.size() == pairs.size());
    CHECK(from_samples == from_pairs);
    CHECK(build_vggss_instructions(pairs, templates, 3) == samples);
}

TEST_CASE("caption normalization") {
    CHECK(normalize_image_caption("a dog on grass") == "The image shows a dog on grass.");
    CHECK(normalize_audio_caption("rain falling") == "The audio is rain falling.");
    CHECK(normalize_audio_caption("Rain falling!!") == "The audio is rain falling.");
    CHECK(normalize_image_caption("The image shows a cat.") == "The image shows a cat.");
}

TEST_CASE("negative pair from one caption each") {
    const std::vector<CaptionRecord> audio = {{ref(ModalityKind::audio, 1), "rain falling", "a1"}};
    const std::vector<CaptionRecord> images = {{ref(ModalityKind::image, 1), "a dog on grass", "i1"}};
    const auto s = build_negative_pairs(audio, images, 1, 0);
    REQUIRE(s.size() == 1);
    CHECK(s[0].response == "The image shows a dog on grass. The audio is rain falling.");
    CHECK_FALSE(s[0].related);
    CHECK(in_family(prompting::relatedness_family(), s[0].instruction));
}

TEST_CASE("negative pairs: seed 7, 100 samples") {
    const auto a = negatives_seed7();
    const auto b = negatives_seed7();
    REQUIRE(a.size() == 100);
    CHECK(a == b);
    const auto& fx = testing::fixture_set();
    std::map<std::string, std::string> source;
    for (const auto& x : fx.audios) source[x.input.digest()] = x.source_id;
    for (const auto& x : fx.images) source[x.input.digest()] = x.source_id;
    for (const auto& s : a) {
        CHECK(validate_sample(s).empty());
        CHECK(has_negative_pair_structure(s.response));
        CHECK_FALSE(s.related);
        CHECK(in_family(prompting::relatedness_family(), s.instruction));
        REQUIRE(s.audio);
        REQUIRE(s.image);
        CHECK(source.at(s.audio->digest) != source.at(s.image->digest));
    }
}

TEST_CASE("negative-pair structure") {
    CHECK(has_negative_pair_structure("The image shows x. The audio is y."));
    CHECK_FALSE(has_negative_pair_structure("The audio is y. The image shows x."));
    CHECK_FALSE(has_negative_pair_structure("The image shows x.The audio is y."));
    CHECK_FALSE(has_negative_pair_structure("The image shows x. The audio is y. The audio is z."));
}

TEST_CASE("negative sampling fails cleanly when every pair shares a source") {
    const std::vector<CaptionRecord> audio = {{ref(ModalityKind::audio, 1), "rain", "same"}};
    const std::vector<CaptionRecord> images = {{ref(ModalityKind::image, 1), "a roof", "same"}};
    CHECK_THROWS_AS(build_negative_pairs(audio, images, 1, 0), PreconditionError);
    CHECK_THROWS_AS(build_negative_pairs({}, images, 1, 0), PreconditionError);
    CHECK_THROWS_AS(build_negative_pairs(audio, images, 0, 0), PreconditionError);
}

TEST_CASE("stage-2 mixing") {
    const auto neg = negatives_seed7();
    std::vector<InstructionSample> pos(neg.begin(), neg.begin() + 10);
    for (auto& p : pos) p.related = true;
    const auto mixed = mix_stage2(pos, neg, 0.5, 1);
    CHECK(mixed.size() == 15);
    std::size_t negatives = 0;
    for (const auto& s : mixed) negatives += s.related ? 0 : 1;
    CHECK(negatives == 5);
    CHECK(mix_stage2(pos, neg, 0.5, 1) == mixed);
}

TEST_CASE("dataset files round-trip and detect tampering") {
    testing::TempDir dir;
    DatasetManifest m;
    m.name = "toy";
    m.kind = DatasetKind::audio_image_text;
    m.record_type = "instruction";
    const auto samples = negatives_seed7();
    const auto path = write_dataset(dir.path(), m, to_records(samples));
    const auto loaded = load_dataset(path);
    CHECK(loaded.manifest.count == 100);
    CHECK(from_records<InstructionSample>(loaded.records) == samples);

    const auto report = validate_manifest(loaded.manifest, 100, &loaded.records);
    CHECK(report.pass());
    CHECK_FALSE(validate_manifest(loaded.manifest, 99).pass());

    std::ofstream(dir.path() / "toy.jsonl", std::ios::app) << "{}\n";
    CHECK_THROWS_AS(load_dataset(path), FormatError);
}

TEST_CASE("fixture manifest of 10 samples against expectation 10") {
    testing::TempDir dir;
    DatasetManifest m;
    m.name = "ten";
    m.kind = DatasetKind::audio_image_text;
    m.record_type = "instruction";
    const auto all = negatives_seed7();
    const std::vector<InstructionSample> ten(all.begin(), all.begin() + 10);
    const auto loaded = load_dataset(write_dataset(dir.path(), m, to_records(ten)));
    CHECK(validate_manifest(loaded.manifest, 10, &loaded.records).pass());
}

TEST_CASE("reference counts") {
    const std::pair<const char*, std::size_t> expected[] = {
        {"wavcaps", 403050},        {"wavcaps-freesound", 262300},   {"wavcaps-bbc-sound-effects", 31201},
        {"wavcaps-soundbible", 1231}, {"wavcaps-audioset-strong", 108317}, {"minigpt4-align", 3439},
        {"llava-instruct", 158000}, {"llava-conversation", 58000},  {"llava-detail", 23000},
        {"llava-reasoning", 77000}, {"clotho-detail", 3938},        {"vggss-instruction", 5158},
    };
    for (const auto& [name, count] : expected) {
        CAPTURE(name);
        const auto r = find_reference(name);
        REQUIRE(r);
        CHECK(r->count == count);
    }
    CHECK(kClothoDetailMeanWords == 52.70);
    // The published total is one clip more than its four published parts; both are kept as published.
    const auto parts = find_reference("wavcaps-freesound")->count + find_reference("wavcaps-bbc-sound-effects")->count +
                       find_reference("wavcaps-soundbible")->count + find_reference("wavcaps-audioset-strong")->count;
    CHECK(parts == 403049);
}

TEST_CASE("raw corpus loading and validation") {
    testing::TempDir dir;
    const auto path = dir.path() / "raw.json";
    const std::vector<std::string> texts = {"one two three", "four five", "six seven eight nine"};
    nlohmann::json items = nlohmann::json::array();
    items.push_back({{"description", texts[0]}});
    items.push_back({{"caption", texts[1]}});
    items.push_back({{"conversations", {{{"from", "human"}, {"value", "q"}}, {{"from", "gpt"}, {"value", texts[2]}}}}});
    std::ofstream(path) << nlohmann::json{{"annotations", items}}.dump();
    const auto corpus = load_raw_corpus(path);
    CHECK(corpus.count == 3);
    CHECK(corpus.texts == texts);
    double words = 0;
    for (const auto& t : texts) words += static_cast<double>(oracle_words(t));
    CHECK(corpus.mean_words() == doctest::Approx(words / 3));
    const auto report = validate_raw_corpus("clotho-detail", corpus);
    CHECK_FALSE(report.pass());
    CHECK(report.to_text().find("3938") != std::string::npos);
}

TEST_CASE("media store is content addressed") {
    testing::TempDir dir;
    MediaStore store(dir.path());
    const auto in = ModalityInput::from_bytes(ModalityKind::image, media::synthetic_png(4));
    const auto r = store.put(in);
    CHECK(store.contains(r));
    CHECK(store.get(r) == in);
    CHECK(store.path_of(r).parent_path().filename() == in.digest().substr(0, 2));
    std::ofstream(store.path_of(r), std::ios::binary | std::ios::app) << "x";
    CHECK_THROWS_AS(store.get(r), FormatError);
    CHECK_THROWS_AS(store.get(MediaRef{ModalityKind::image, MediaFormat::png, std::string(64, 'a')}), NotFoundError);
}
