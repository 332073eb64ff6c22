#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "groundchat/error.hpp"
#include "groundchat/media/audio.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/media/synthetic.hpp"
#include "groundchat/model/checkpoint.hpp"
#include "groundchat/model/stack.hpp"

using namespace groundchat;
using namespace groundchat::model;

namespace {

ModalityInput image(std::uint64_t seed = 1) {
    return ModalityInput::from_bytes(ModalityKind::image, media::synthetic_png(seed));
}

ModalityInput audio(std::uint64_t seed = 1) {
    return ModalityInput::from_bytes(ModalityKind::audio, media::synthetic_wav(seed, 0.5));
}

std::size_t token_count(const MultimodalModel& m, std::string_view text) {
    return m.llm().tokenizer().encode(text).size();
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

} // namespace

TEST_CASE("block shape is Q x D_llm across the config matrix") {
    for (std::size_t q : {1u, 8u, 32u}) {
        for (std::size_t d : {16u, 128u}) {
            ModelConfig c;
            c.queries = q;
            c.llm_dim = d;
            const auto m = MultimodalModel::build_toy(c);
            for (const auto& input : {image(), audio()}) {
                const auto block = encode_modality(input, m.stack(input.kind()));
                CAPTURE(q);
                CAPTURE(d);
                CHECK(block.values.rows() == static_cast<Eigen::Index>(q));
                CHECK(block.values.cols() == static_cast<Eigen::Index>(d));
                CHECK(block.values.allFinite());
                CHECK(block.source_digest == input.digest());
            }
        }
    }
}

TEST_CASE("zero projection yields a zero block") {
    auto m = MultimodalModel::build_toy({});
    auto& proj = m.stack(ModalityKind::image).projection;
    proj.weight.setZero();
    proj.bias.setZero();
    CHECK(encode_modality(image(), m.stack(ModalityKind::image)).values.isZero(0.0));
}

TEST_CASE("encoding is deterministic and rejects mismatched kinds") {
    const auto a = MultimodalModel::build_toy({});
    const auto b = MultimodalModel::build_toy({});
    const auto x = image(4);
    CHECK(encode_modality(x, a.stack(ModalityKind::image)).values ==
          encode_modality(x, b.stack(ModalityKind::image)).values);
    CHECK(encode_modality(x, a.stack(ModalityKind::image)).values ==
          encode_modality(x, a.stack(ModalityKind::image)).values);
    CHECK_THROWS_AS(encode_modality(x, a.stack(ModalityKind::audio)), InputError);
    const ModalityInput broken(ModalityKind::image, MediaFormat::png, {0x89, 'P', 'N', 'G', 1, 2, 3});
    CHECK_THROWS_AS(encode_modality(broken, a.stack(ModalityKind::image)), InputError);
}

TEST_CASE("splice length is text tokens plus Q per slot") {
    const auto m = MultimodalModel::build_toy({});
    const std::string ten = "~~~~~~~~~~";
    REQUIRE(token_count(m, ten) == 10);
    const auto block = encode_modality(image(), m.stack(ModalityKind::image));

    prompting::PromptAssembly one;
    one.append_slot({ModalityKind::image, "slot-0", {}});
    one.append_text(ten);
    CHECK(splice_embeddings(one, {{"slot-0", block}}, m.llm()).size() == 42);

    prompting::PromptAssembly two;
    two.append_text("~~~~~~");
    two.append_slot({ModalityKind::image, "slot-0", {}});
    two.append_slot({ModalityKind::audio, "slot-1", {}});
    two.append_text("~~~~~~");
    const auto ablock = encode_modality(audio(), m.stack(ModalityKind::audio));
    const auto seq = splice_embeddings(two, {{"slot-0", block}, {"slot-1", ablock}}, m.llm());
    CHECK(seq.size() == 76);
    CHECK(seq.rows.rows() == 76);
    // Order: 6 text rows, 32 vision rows, 32 audio rows, 6 text rows.
    CHECK(seq.positions[5].token_id >= 0);
    CHECK(seq.positions[6].slot_id == "slot-0");
    CHECK(seq.positions[38].slot_id == "slot-1");
    CHECK(seq.positions[70].token_id >= 0);
    CHECK(seq.rows.row(6) == block.values.row(0));
    CHECK(seq.rows.row(38) == ablock.values.row(0));
}

TEST_CASE("splice errors name the slot") {
    const auto m = MultimodalModel::build_toy({});
    prompting::PromptAssembly p;
    p.append_slot({ModalityKind::image, "slot-7", {}});
    CHECK_THROWS_WITH_AS(splice_embeddings(p, {}, m.llm()), doctest::Contains("slot-7"), PreconditionError);
    EmbeddingBlock narrow{Matrix::Zero(32, 16), "x"};
    CHECK_THROWS_AS(splice_embeddings(p, {{"slot-7", narrow}}, m.llm()), PreconditionError);
}

TEST_CASE("generation overflows explicitly") {
    ModelConfig c;
    c.max_context = 40;
    const auto m = MultimodalModel::build_toy(c);
    prompting::PromptAssembly p;
    p.append_slot({ModalityKind::image, "slot-0", {}});
    p.append_text("~~~~~~~~~~");
    const auto seq = splice_embeddings(p, {{"slot-0", encode_modality(image(), m.stack(ModalityKind::image))}}, m.llm());
    CHECK_THROWS_WITH_AS(generate(seq, m.llm(), {}), doctest::Contains("42"), OverflowError);
}

TEST_CASE("greedy generation is deterministic and pure") {
    const auto m = MultimodalModel::build_toy({});
    const auto before = m.group_hashes();
    const auto prompt = prompting::build_chat_prompt({}, "What is the image?", true, false);
    const std::map<std::string, ModalityInput> inputs = {{"slot-0", image(2)}};
    GenerationConfig g;
    g.max_new_tokens = 12;
    const auto first = respond(m, prompt, inputs, g);
    const auto second = respond(m, prompt, inputs, g);
    CHECK(first == second);
    CHECK(m.group_hashes() == before);
}

TEST_CASE("sampled generation is reproducible under a seed") {
    const auto m = MultimodalModel::build_toy({});
    const auto prompt = prompting::build_chat_prompt({}, "What is the image?", true, false);
    const std::map<std::string, ModalityInput> inputs = {{"slot-0", image(2)}};
    GenerationConfig g;
    g.max_new_tokens = 12;
    g.temperature = 1.0;
    g.seed = 99;
    CHECK(respond(m, prompt, inputs, g) == respond(m, prompt, inputs, g));
}

TEST_CASE("echo adapter returns canned replies by digest") {
    auto m = MultimodalModel::build_toy({});
    const auto img = image(5);
    const auto aud = audio(5);
    m.set_llm(std::make_shared<EchoLLM>(m.llm_ptr(),
                                        std::map<std::string, std::string>{{img.digest(), "A red square."},
                                                                           {aud.digest(), "A beep."},
                                                                           {img.digest() + "+" + aud.digest(), "Both."}},
                                        "fallback"));
    auto ask = [&](bool with_image, bool with_audio) {
        const auto p = prompting::build_chat_prompt({}, "Describe.", with_image, with_audio);
        std::map<std::string, ModalityInput> inputs;
        std::size_t i = 0;
        if (with_image) inputs.emplace("slot-" + std::to_string(i++), img);
        if (with_audio) inputs.emplace("slot-" + std::to_string(i++), aud);
        return respond(m, p, inputs, {});
    };
    CHECK(ask(true, false) == "A red square.");
    CHECK(ask(false, true) == "A beep.");
    CHECK(ask(true, true) == "Both.");
}

TEST_CASE("switched-off LLM raises an adapter error") {
    auto m = MultimodalModel::build_toy({});
    auto sw = std::make_shared<SwitchableLLM>(m.llm_ptr());
    m.set_llm(sw);
    const auto p = prompting::build_chat_prompt({}, "Describe.", true, false);
    const std::map<std::string, ModalityInput> inputs = {{"slot-0", image()}};
    sw->set_available(false);
    CHECK_THROWS_AS(respond(m, p, inputs, {}), AdapterError);
    sw->set_available(true);
    CHECK_NOTHROW(respond(m, p, inputs, {}));
}

TEST_CASE("tokenizer round-trips arbitrary bytes") {
    const auto& tok = Tokenizer::builtin();
    std::mt19937 rng(5);
    for (int i = 0; i < 200; ++i) {
        std::string s;
        for (int n = static_cast<int>(rng() % 40); n > 0; --n) s += static_cast<char>(rng() % 256);
        REQUIRE(tok.decode(tok.encode(s)) == s);
    }
    const auto ids = tok.encode("The dog barks.");
    CHECK(ids.size() < std::string("The dog barks.").size());
    for (int id : ids) CHECK(id != Tokenizer::kEos);
}

TEST_CASE("checkpoint round-trip restores the heads") {
    auto a = MultimodalModel::build_toy({});
    a.stack(ModalityKind::audio).projection.bias.setConstant(0.25);
    const auto ck = capture_heads(a, {"stage1_audio", 7});
    std::stringstream buf;
    write_checkpoint(buf, ck);
    const auto back = read_checkpoint(buf);
    CHECK(back.meta.stage == "stage1_audio");
    CHECK(back.meta.step == 7);
    CHECK(back.config == a.config());
    auto b = MultimodalModel::build_toy({});
    CHECK(b.group_hashes() != a.group_hashes());
    apply_heads(back, b);
    CHECK(b.group_hashes() == a.group_hashes());

    std::string bytes = buf.str();
    bytes[bytes.size() - 3] ^= 0x5a;
    std::stringstream corrupt(bytes);
    CHECK_THROWS_AS(read_checkpoint(corrupt), FormatError);

    ModelConfig other;
    other.queries = 8;
    auto c = MultimodalModel::build_toy(other);
    CHECK_THROWS(apply_heads(back, c));
}

TEST_CASE("wav encode and decode round-trip") {
    media::AudioClip clip;
    clip.sample_rate = 8000;
    for (int i = 0; i < 800; ++i) clip.samples.push_back(static_cast<float>(0.5 * std::sin(i * 0.05)));
    const auto back = media::decode_wav(media::encode_wav(clip));
    CHECK(back.sample_rate == 8000);
    REQUIRE(back.samples.size() == clip.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); ++i) CHECK(std::abs(back.samples[i] - clip.samples[i]) < 1.0 / 32767 + 1e-6);
    CHECK(media::resample(clip, 16000).samples.size() == 1600);
}

TEST_CASE("log-mel peak sits at the tone frequency") {
    media::MelConfig cfg;
    media::AudioClip clip;
    for (int i = 0; i < cfg.sample_rate / 2; ++i) {
        clip.samples.push_back(static_cast<float>(0.8 * std::sin(2.0 * M_PI * 1000.0 * i / cfg.sample_rate)));
    }
    const auto mel = media::log_mel_spectrogram(clip, cfg);
    CHECK(mel.cols() == cfg.n_mels);
    CHECK(mel.rows() == 1 + (static_cast<Eigen::Index>(clip.samples.size()) - cfg.n_fft) / cfg.hop);
    Eigen::Index band = 0;
    mel.colwise().mean().maxCoeff(&band);
    // Independent HTK centers: n_mels + 2 points evenly spaced in mel.
    const double top = hz_to_mel(cfg.sample_rate / 2.0);
    const double step = top / (cfg.n_mels + 1);
    const double center = mel_to_hz(step * static_cast<double>(band + 1));
    const double spacing = mel_to_hz(step * static_cast<double>(band + 2)) - center;
    CHECK(std::abs(center - 1000.0) <= spacing);
}

TEST_CASE("mask PNG round-trip") {
    std::vector<std::uint8_t> bits(13 * 9, 0);
    for (std::size_t i = 0; i < bits.size(); i += 4) bits[i] = 1;
    const auto mask = SegmentMask::from_bitmap(13, 9, bits);
    CHECK(media::decode_mask_png(media::encode_mask_png(mask)) == mask);
}
