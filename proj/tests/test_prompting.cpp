#include <doctest.h>

#include <chrono>
#include <random>

#include "groundchat/error.hpp"
#include "groundchat/model/tokenizer.hpp"
#include "groundchat/prompting/prompt.hpp"

using namespace groundchat;
using namespace groundchat::prompting;

namespace {

std::string render(std::string_view instruction, bool image, bool audio) {
    return build_chat_prompt({}, instruction, image, audio).render();
}

std::vector<std::string> surfaces(std::string_view text) {
    const auto& tok = model::Tokenizer::builtin();
    std::vector<std::string> out;
    for (int id : tok.encode(text)) out.push_back(tok.piece(id));
    return out;
}

std::size_t count_occurrences(const std::string& hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

// Smallest k whose prefix already holds every marker occurrence, then past
// any empty (modality) surfaces.
std::size_t scan_boundary(const std::vector<std::string>& tokens, std::string_view marker) {
    std::string all;
    for (const auto& t : tokens) all += t;
    const auto total = count_occurrences(all, marker);
    std::string prefix;
    std::size_t k = 0;
    while (k < tokens.size() && count_occurrences(prefix, marker) < total) prefix += tokens[k++];
    while (k < tokens.size() && tokens[k].empty()) ++k;
    return k;
}

} // namespace

TEST_CASE("chat prompt goldens for the four instruction families") {
    const auto start = std::chrono::steady_clock::now();
    CHECK(render("What is the image?", true, false) ==
          "###Human: <Vision><ModalityHere></Vision> What is the image? ###Assistant:");
    CHECK(render("Pay attention to the audio and describe what you notice.", false, true) ==
          "###Human: <Audio><ModalityHere></Audio> Pay attention to the audio and describe what you notice. "
          "###Assistant:");
    CHECK(render("Please find the source that emits the given sound in this image.", true, true) ==
          "###Human: <Vision><ModalityHere></Vision> <Audio><ModalityHere></Audio> Please find the source that "
          "emits the given sound in this image. ###Assistant:");
    CHECK(render("Are the audio and image related to each other? What are they?", true, true) ==
          "###Human: <Vision><ModalityHere></Vision> <Audio><ModalityHere></Audio> Are the audio and image "
          "related to each other? What are they? ###Assistant:");
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("instruction constants match the family goldens") {
    CHECK(kDescribeImage == "What is the image?");
    CHECK(kDescribeAudio == "Pay attention to the audio and describe what you notice.");
    CHECK(kLocalizeSound == "Please find the source that emits the given sound in this image.");
    CHECK(kAskRelatedness == "Are the audio and image related to each other? What are they?");
    CHECK(localization_family()[0] == kLocalizeSound);
    CHECK(relatedness_family()[0] == kAskRelatedness);
}

TEST_CASE("slots follow the modalities, vision first") {
    ChatPromptOptions opts;
    opts.image_digest = "img";
    opts.audio_digest = "aud";
    const auto p = build_chat_prompt({}, "Describe.", true, true, opts);
    const auto slots = p.slots();
    REQUIRE(slots.size() == 2);
    CHECK(slots[0].kind == ModalityKind::image);
    CHECK(slots[0].slot_id == "slot-0");
    CHECK(slots[0].source_digest == "img");
    CHECK(slots[1].kind == ModalityKind::audio);
    CHECK(slots[1].slot_id == "slot-1");
    CHECK(build_chat_prompt({}, "Describe.", false, true).slots().size() == 1);
    CHECK(build_chat_prompt({}, "Describe.", true, true, opts) == p);
}

TEST_CASE("history is prepended in order") {
    const std::vector<ChatTurn> turns = {
        {Role::human, "What is the image?", {MediaRef{ModalityKind::image, MediaFormat::png, "d1"}}},
        {Role::assistant, "A dog.", {}},
    };
    const auto p = build_chat_prompt(turns, "What color is it?", false, false);
    CHECK(p.render() ==
          "###Human: <Vision><ModalityHere></Vision> What is the image? ###Assistant: A dog. ###Human: What color is "
          "it? ###Assistant:");
    REQUIRE(p.slots().size() == 1);
    CHECK(p.slots()[0].source_digest == "d1");
}

TEST_CASE("chat prompt preconditions") {
    CHECK_THROWS_AS(build_chat_prompt({}, "", true, false), PreconditionError);
    CHECK_THROWS_AS(build_chat_prompt({}, "Hello.", false, false), PreconditionError);
    ChatPromptOptions text_only;
    text_only.allow_text_only = true;
    CHECK(build_chat_prompt({}, "Hello.", false, false, text_only).render() == "###Human: Hello. ###Assistant:");
    CHECK_THROWS_AS(build_chat_prompt({}, "say <ModalityHere>", true, false), PreconditionError);
    const std::vector<ChatTurn> bad = {
        {Role::assistant, "x", {MediaRef{ModalityKind::image, MediaFormat::png, "d"}}}};
    CHECK_THROWS_AS(build_chat_prompt(bad, "Hi.", true, false), PreconditionError);
}

TEST_CASE("matching prompt payload") {
    const std::vector<std::string> labels = {"dog", "frisbee"};
    const auto p = build_matching_prompt(labels, "A dog catches a frisbee.");
    CHECK(p.user == "<List>dog, frisbee</List>,<Text>A dog catches a frisbee.</Text>");
    CHECK(p.system == kMatcherInstruction);
    CHECK(p.full() == std::string(kMatcherInstruction) + "\n\n" + p.user);
    CHECK(build_matching_prompt({}, "Hello.").user == "<List></List>,<Text>Hello.</Text>");
    const std::vector<std::string> one = {"a"};
    CHECK_THROWS_AS(build_matching_prompt(one, ""), PreconditionError);
}

TEST_CASE("matching prompt holds the text verbatim exactly once") {
    std::mt19937 rng(3);
    const std::string alphabet = "abc <>/,.dogXYZ";
    for (int i = 0; i < 200; ++i) {
        std::string text;
        for (int n = 1 + static_cast<int>(rng() % 30); n > 0; --n) text += alphabet[rng() % alphabet.size()];
        const std::vector<std::string> labels = {"dog", "cat"};
        const auto user = build_matching_prompt(labels, text).user;
        const std::string wrapped = "<Text>" + text + "</Text>";
        REQUIRE(user.size() >= wrapped.size());
        CHECK(user.substr(user.size() - wrapped.size()) == wrapped);
        CHECK(user.find("</List>,<Text>") == user.size() - wrapped.size() - 8);
    }
}

TEST_CASE("loss boundary lands on the first response token") {
    const auto prompt = render("What is the image?", true, false);
    auto tokens = surfaces(prompt);
    const auto n_prompt = tokens.size();
    for (const auto& t : surfaces(" A cat.")) tokens.push_back(t);
    const auto b = response_loss_boundary(tokens);
    CHECK(b == n_prompt);
    CHECK(tokens[b] == " A");
}

TEST_CASE("loss boundary agrees with a scan oracle") {
    std::mt19937 rng(11);
    const std::vector<std::string> pieces = {"###Human:", " hi", " ###Assistant:", " ok", ".", "", " there",
                                             "###", "Assistant:", " x"};
    std::size_t checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::string> tokens;
        for (int n = 1 + static_cast<int>(rng() % 12); n > 0; --n) tokens.push_back(pieces[rng() % pieces.size()]);
        std::string all;
        for (const auto& t : tokens) all += t;
        if (all.find("###Assistant:") == std::string::npos) {
            CHECK_THROWS_WITH_AS(response_loss_boundary(tokens), "malformed training string", PreconditionError);
            continue;
        }
        ++checked;
        REQUIRE(response_loss_boundary(tokens) == scan_boundary(tokens, "###Assistant:"));
    }
    CHECK(checked > 50);
}

TEST_CASE("two-turn training string: boundary follows the second marker") {
    const std::vector<ChatTurn> turns = {{Role::human, "What is the image?", {}}, {Role::assistant, "A dog.", {}}};
    ChatPromptOptions opts;
    opts.allow_text_only = true;
    auto tokens = surfaces(build_chat_prompt(turns, "And the color?", false, false, opts).render());
    const auto n_prompt = tokens.size();
    for (const auto& t : surfaces(" Brown.")) tokens.push_back(t);
    CHECK(response_loss_boundary(tokens) == n_prompt);
    CHECK(response_loss_boundary(tokens) == scan_boundary(tokens, "###Assistant:"));
}
