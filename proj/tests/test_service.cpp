#include <doctest.h>

#include "groundchat/error.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/media/synthetic.hpp"
#include "groundchat/prompting/prompt.hpp"
#include "groundchat/service/chat.hpp"
#include "support.hpp"

using namespace groundchat;
using namespace groundchat::service;

namespace {

struct MockStack {
    std::shared_ptr<model::SwitchableLLM> llm;
    std::shared_ptr<grounding::MockTagger> tagger;
    std::shared_ptr<grounding::MockSegmenter> segmenter;
    Backend backend;
};

MockStack mock_stack() {
    const auto& fx = testing::fixture_set();
    auto table = std::make_shared<const grounding::MockTable>(fx.mocks);
    auto m = std::make_shared<model::MultimodalModel>(model::MultimodalModel::build_toy({}));
    MockStack s;
    s.llm = std::make_shared<model::SwitchableLLM>(std::make_shared<model::EchoLLM>(m->llm_ptr(), table->replies));
    m->set_llm(s.llm);
    s.tagger = std::make_shared<grounding::MockTagger>(table);
    s.segmenter = std::make_shared<grounding::MockSegmenter>();
    s.backend.model = m;
    s.backend.grounding = {s.tagger, std::make_shared<grounding::MockDetector>(table), s.segmenter,
                           std::make_shared<grounding::MockMatcherLLM>()};
    return s;
}

Upload upload(const ModalityInput& in, std::string name) { return {in.payload(), std::move(name)}; }

MessageRequest ask(std::string text, const ModalityInput* image = nullptr, const ModalityInput* audio = nullptr) {
    MessageRequest r;
    r.text = std::move(text);
    if (image) r.image = upload(*image, "image.png");
    if (audio) r.audio = upload(*audio, "audio.wav");
    return r;
}

int status_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return http_status(e);
    }
    return 200;
}

const ModalityInput& dog() { return testing::fixture_set().dog_image; }
const ModalityInput& clip(std::size_t i) { return testing::fixture_set().audios.at(i).input; }

} // namespace

TEST_CASE("sessions") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto a = chat.create_session();
    const auto b = chat.create_session();
    CHECK(a.id != b.id);
    CHECK(a.turns.empty());
    CHECK(chat.get_session(a.id).id == a.id);
    CHECK(chat.session_count() == 2);
    CHECK_THROWS_AS(chat.get_session("nope"), NotFoundError);
}

TEST_CASE("image question returns a grounded reply") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto id = chat.create_session().id;
    const auto reply = chat.post_message(id, ask(std::string(prompting::kDescribeImage), &dog()));
    CHECK(reply.text == fixtures::kDogReply);
    CHECK(reply.turn_index == 1);
    REQUIRE(reply.grounding);
    CHECK(reply.grounding->entities.size() == 2);
    CHECK(reply.grounding->matches.size() == 2);
    CHECK(reply.mask_ids == std::vector<std::string>{"t1-e0", "t1-e1"});
    CHECK_FALSE(reply.related_verdict.has_value());
    const auto session = chat.get_session(id);
    REQUIRE(session.turns.size() == 2);
    CHECK(session.turns[0].attachments.size() == 1);
    CHECK(session.turns[1].text == reply.text);

    const auto j = reply_json(id, reply);
    CHECK(j.at("text") == reply.text);
    CHECK(j.at("grounding").at("entities").size() == 2);
}

TEST_CASE("follow-up turns keep the session image in scope") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto id = chat.create_session().id;
    chat.post_message(id, ask("What is the image?", &dog()));
    const auto second = chat.post_message(id, ask("Tell me more."));
    CHECK(second.turn_index == 3);
    CHECK(second.grounding.has_value());
    CHECK(chat.get_session(id).turns.size() == 4);
}

TEST_CASE("audio-only message has no grounding") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto id = chat.create_session().id;
    const auto reply = chat.post_message(id, ask(std::string(prompting::kDescribeAudio), nullptr, &clip(0)));
    CHECK(reply.text == "A dog is barking loudly.");
    CHECK_FALSE(reply.grounding.has_value());
    CHECK(reply.mask_ids.empty());
}

TEST_CASE("related verdicts for image and audio together") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto id = chat.create_session().id;
    const auto related = chat.post_message(id, ask(std::string(prompting::kAskRelatedness), &dog(), &clip(0)));
    REQUIRE(related.related_verdict);
    CHECK(*related.related_verdict);
    const auto id2 = chat.create_session().id;
    const auto unrelated = chat.post_message(id2, ask(std::string(prompting::kAskRelatedness), &dog(), &clip(1)));
    REQUIRE(unrelated.related_verdict);
    CHECK_FALSE(*unrelated.related_verdict);
    CHECK_FALSE(related_verdict_from_reply("They are not related."));
    CHECK(related_verdict_from_reply("The dog in the picture is making the sound."));
    CHECK_FALSE(related_verdict_from_reply("The image shows a cat. The audio is rain."));
}

TEST_CASE("error statuses") {
    auto s = mock_stack();
    ServiceConfig cfg;
    cfg.max_upload_bytes = 64 * 1024;
    ChatService chat(s.backend, cfg);
    const auto id = chat.create_session().id;

    CHECK(status_of([&] { chat.post_message("missing", ask("hi", &dog())); }) == 404);

    MessageRequest big = ask("What is the image?");
    big.image = Upload{std::vector<std::uint8_t>(cfg.max_upload_bytes + 1, 0x89), "big.png"};
    CHECK(status_of([&] { chat.post_message(id, big); }) == 413);

    MessageRequest junk = ask("What is the image?");
    junk.image = Upload{{'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'a', 'g', 'e'}, "x.png"};
    CHECK(status_of([&] { chat.post_message(id, junk); }) == 422);
    MessageRequest truncated = ask("What is the image?");
    truncated.image = Upload{{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n', 0, 0}, "t.png"};
    CHECK(status_of([&] { chat.post_message(id, truncated); }) == 422);

    s.llm->set_available(false);
    CHECK(status_of([&] { chat.post_message(id, ask("What is the image?", &dog())); }) == 503);
    s.llm->set_available(true);

    CHECK(status_of([&] { chat.post_message(id, ask("", &dog())); }) == 400);
    CHECK(status_of([&] { chat.post_message(id, ask("Hello.")); }) == 400);
    CHECK(chat.get_session(id).turns.empty());

    const auto j = error_json(NotFoundError("unknown session x", "session"));
    CHECK(j.at("code") == "not_found");
    CHECK(j.at("stage") == "session");
    CHECK(j.at("schema_version") == 1);
}

TEST_CASE("text-only chat needs the flag") {
    auto s = mock_stack();
    ServiceConfig cfg;
    cfg.allow_text_only = true;
    ChatService chat(s.backend, cfg);
    const auto id = chat.create_session().id;
    CHECK_NOTHROW(chat.post_message(id, ask("Hello.")));
}

TEST_CASE("grounding outage keeps the reply") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto id = chat.create_session().id;
    s.tagger->set_available(false);
    const auto reply = chat.post_message(id, ask("What is the image?", &dog()));
    CHECK(reply.text == fixtures::kDogReply);
    CHECK_FALSE(reply.grounding.has_value());
    REQUIRE(reply.grounding_error);
    CHECK(reply.grounding_error->at("status") == 503);
    CHECK(reply.grounding_error->at("stage") == "tag");
    CHECK(chat.get_session(id).turns.size() == 2);

    s.tagger->set_available(true);
    s.segmenter->set_available(false);
    const auto partial = chat.post_message(id, ask("What is the image?", &dog()));
    REQUIRE(partial.grounding);
    CHECK(partial.grounding->matches.size() == 2);
    CHECK(partial.mask_ids.empty());
}

TEST_CASE("masks round-trip through PNG") {
    auto s = mock_stack();
    ChatService chat(s.backend, {});
    const auto id = chat.create_session().id;
    const auto reply = chat.post_message(id, ask("What is the image?", &dog()));
    REQUIRE(reply.grounding);
    for (std::size_t e = 0; e < reply.mask_ids.size(); ++e) {
        const auto mask = media::decode_mask_png(chat.get_mask(id, reply.mask_ids[e]));
        CHECK(mask == *reply.grounding->entities[e].mask);
        CHECK(mask.width() == 96);
        CHECK(mask.height() == 72);
    }
    CHECK_THROWS_AS(chat.get_mask(id, "t9-e0"), NotFoundError);
    CHECK_THROWS_AS(chat.get_mask(id, "garbage"), NotFoundError);
    CHECK_THROWS_AS(chat.get_mask("nope", "t1-e0"), NotFoundError);
}

TEST_CASE("transcript replay against a fresh service is identical") {
    const auto& fx = testing::fixture_set();
    const std::vector<MessageRequest> transcript = {
        ask("What is the image?", &dog()),
        ask("Pay attention to the audio and describe what you notice.", nullptr, &clip(2)),
        ask(std::string(prompting::kLocalizeSound), &dog(), &clip(0)),
        ask("What else?"),
        ask("And this one?", &fx.images[3].input),
    };
    auto replay = [&] {
        auto s = mock_stack();
        ServiceConfig cfg;
        cfg.seed = 11;
        ChatService chat(s.backend, cfg);
        const auto id = chat.create_session().id;
        std::vector<std::string> out{id};
        grounding::ResultJsonOptions opts;
        opts.include_timings = false;
        for (const auto& m : transcript) {
            auto r = chat.post_message(id, m);
            if (r.grounding) r.grounding->timings_ms.clear();
            out.push_back(reply_json(id, r).dump());
        }
        return out;
    };
    const auto a = replay();
    const auto b = replay();
    CHECK(a == b);
}

TEST_CASE("sessions persist across restarts") {
    testing::TempDir dir;
    auto s = mock_stack();
    ServiceConfig cfg;
    cfg.persistence_dir = dir.path();
    std::string id;
    {
        ChatService chat(s.backend, cfg);
        id = chat.create_session().id;
        chat.post_message(id, ask("What is the image?", &dog()));
        chat.flush();
    }
    ChatService again(s.backend, cfg);
    const auto session = again.get_session(id);
    CHECK(session.turns.size() == 2);
    CHECK(session.groundings.size() == 1);
    const auto next = again.post_message(id, ask("Anything else?"));
    CHECK(next.turn_index == 3);
    CHECK(next.grounding.has_value());
}

TEST_CASE("negative-pair checkpoint answers with separate descriptions") {
    auto trained = model::MultimodalModel::build_toy({});
    const auto data = testing::overfit_examples();
    REQUIRE(testing::run_overfit(trained, data, 500).steps > 0);
    Backend backend;
    backend.model = std::make_shared<model::MultimodalModel>(std::move(trained));
    backend.grounding = grounding::make_mock_adapters(std::make_shared<const grounding::MockTable>());
    ChatService chat(backend, {});
    const auto id = chat.create_session().id;
    const auto& neg = data[testing::kNegativeIndex];
    const auto reply = chat.post_message(id, ask(neg.instruction, &*neg.image, &*neg.audio));
    CHECK(reply.text == neg.response);
    CHECK(reply.text.find("The image") != std::string::npos);
    CHECK(reply.text.find("The audio") != std::string::npos);
    REQUIRE(reply.related_verdict);
    CHECK_FALSE(*reply.related_verdict);
}
