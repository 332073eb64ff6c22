#include <doctest.h>

#include <random>

#include "groundchat/core/digest.hpp"
#include "groundchat/core/serialization.hpp"
#include "groundchat/error.hpp"
#include "groundchat/media/synthetic.hpp"

using namespace groundchat;

namespace {

template <class T>
T round_trip(const T& value) {
    const Json j = value;
    return Json::parse(j.dump()).get<T>();
}

MediaRef image_ref() {
    return MediaRef::of(ModalityInput::from_bytes(ModalityKind::image, media::synthetic_png(3)));
}

MediaRef audio_ref() {
    return MediaRef::of(ModalityInput::from_bytes(ModalityKind::audio, media::synthetic_wav(3, 0.1)));
}

} // namespace

TEST_CASE("validate_sample reports each broken invariant") {
    InstructionSample ok{image_ref(), std::nullopt, "What is the image?", "A car.", true};
    CHECK(validate_sample(ok).empty());

    InstructionSample none = ok;
    none.image.reset();
    const auto v1 = validate_sample(none);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0] == "at least one modality required");

    InstructionSample empty = ok;
    empty.response.clear();
    const auto v2 = validate_sample(empty);
    REQUIRE(v2.size() == 1);
    CHECK(v2[0] == "response non-empty");

    InstructionSample swapped = ok;
    swapped.image = audio_ref();
    CHECK_FALSE(validate_sample(swapped).empty());
}

TEST_CASE("assistant turns carry no attachments") {
    ChatTurn t{Role::assistant, "Hi.", {image_ref()}};
    CHECK_FALSE(validate_turn(t).empty());
    t.attachments.clear();
    CHECK(validate_turn(t).empty());
}

TEST_CASE("serialization round-trips every domain type") {
    CHECK(round_trip(Tag{"dog", 0.75}) == Tag{"dog", 0.75});
    TagSet tags({{"dog", 0.9}, {"grass", 0.6}});
    CHECK(round_trip(tags) == tags);
    const BoundingBox box{1.5, 2, 30.25, 40};
    CHECK(round_trip(box) == box);

    std::vector<std::uint8_t> bits(12 * 7, 0);
    for (std::size_t i = 0; i < bits.size(); i += 3) bits[i] = 1;
    const auto mask = SegmentMask::from_bitmap(12, 7, bits);
    CHECK(round_trip(mask) == mask);

    const GroundedEntity with_mask{"dog", {0, 0, 5, 5}, mask, 0.8};
    CHECK(round_trip(with_mask) == with_mask);
    const GroundedEntity without_mask{"cat", {1, 1, 4, 6}, std::nullopt, 0.3};
    CHECK(round_trip(without_mask) == without_mask);

    const EntityMatch match{1, 2, 5, "dog"};
    CHECK(round_trip(match) == match);
    CHECK(round_trip(image_ref()) == image_ref());

    const InstructionSample sample{image_ref(), audio_ref(), "Are they related?", "The image shows x. The audio is y.",
                                   false};
    CHECK(round_trip(sample) == sample);
    const ChatTurn turn{Role::human, "hello", {image_ref(), audio_ref()}};
    CHECK(round_trip(turn) == turn);

    const auto input = ModalityInput::from_bytes(ModalityKind::audio, media::synthetic_wav(5, 0.05));
    const auto back = modality_input_from_json(Json::parse(modality_input_to_json(input).dump()));
    CHECK(back == input);
    CHECK(back.payload() == input.payload());
    CHECK(back.format() == MediaFormat::wav);
}

TEST_CASE("decoding rejects invariant violations") {
    CHECK_THROWS_AS(Json({{"label", "dog"}, {"score", 1.5}}).get<Tag>(), FormatError);
    CHECK_THROWS_AS(Json({{"label", ""}, {"score", 0.5}}).get<Tag>(), FormatError);
    CHECK_THROWS_AS(Json({{"width", 2}, {"height", 2}, {"rle", {1, 2}}}).get<SegmentMask>(), FormatError);
}

TEST_CASE("mask RLE is a bijection on random bitmaps up to 64x64") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 400; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 64);
        const int h = 1 + static_cast<int>(rng() % 64);
        const double density = static_cast<double>(rng() % 101) / 100.0;
        std::bernoulli_distribution on(density);
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(w * h));
        std::size_t area = 0;
        for (auto& b : bits) {
            b = on(rng) ? 1 : 0;
            area += b;
        }
        const auto mask = SegmentMask::from_bitmap(w, h, bits);
        REQUIRE(mask.to_bitmap() == bits);
        REQUIRE(mask.area() == area);
        REQUIRE(SegmentMask::from_runs(w, h, mask.runs()) == mask);
    }
}

TEST_CASE("mask RLE is a bijection on every 3x3 bitmap") {
    for (unsigned code = 0; code < 512; ++code) {
        std::vector<std::uint8_t> bits(9);
        for (unsigned i = 0; i < 9; ++i) bits[i] = (code >> i) & 1u;
        REQUIRE(SegmentMask::from_bitmap(3, 3, bits).to_bitmap() == bits);
    }
}

TEST_CASE("mask runs must cover the image") {
    CHECK_THROWS_AS(SegmentMask::from_runs(4, 4, {3, 4}), FormatError);
    CHECK_NOTHROW(SegmentMask::from_runs(4, 4, {0, 16}));
}

TEST_CASE("iou and mask containment") {
    CHECK(iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
    CHECK(iou({0, 0, 2, 2}, {2, 2, 3, 3}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);

    std::vector<std::uint8_t> bits(10 * 10, 0);
    bits[5 * 10 + 5] = 1;
    const auto mask = SegmentMask::from_bitmap(10, 10, bits);
    CHECK(mask_within_box(mask, {4, 4, 7, 7}, 0));
    CHECK_FALSE(mask_within_box(mask, {0, 0, 3, 3}, 0));
    CHECK(mask_within_box(mask, {0, 0, 3, 3}, 3));
}

TEST_CASE("box validity") {
    CHECK(BoundingBox{0, 0, 10, 10}.valid_for(10, 10));
    CHECK_FALSE(BoundingBox{0, 0, 11, 10}.valid_for(10, 10));
    CHECK_FALSE(BoundingBox{5, 0, 5, 10}.valid_for(10, 10));
}

TEST_CASE("sha256 matches published test vectors") {
    CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Sha256 inc;
    inc.update(std::string_view("a")).update(std::string_view("bc"));
    CHECK(inc.finish() == sha256_hex(std::string_view("abc")));
}

TEST_CASE("base64 matches RFC 4648 vectors") {
    auto enc = [](std::string_view s) {
        return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foobar") == "Zm9vYmFy");
    const auto dec = base64_decode("Zm9vYg==");
    CHECK(std::string(dec.begin(), dec.end()) == "foob");
    CHECK_THROWS_AS(base64_decode("Zm9*"), FormatError);
}

TEST_CASE("format sniffing and kind checks") {
    const auto png = media::synthetic_png(1);
    const auto wav = media::synthetic_wav(1, 0.05);
    CHECK(sniff_format(png) == MediaFormat::png);
    CHECK(sniff_format(wav) == MediaFormat::wav);
    const std::vector<std::uint8_t> junk{'h', 'e', 'l', 'l', 'o'};
    CHECK_FALSE(sniff_format(junk).has_value());
    CHECK_THROWS_AS(ModalityInput::from_bytes(ModalityKind::image, wav), InputError);
    CHECK_THROWS_AS(ModalityInput::from_bytes(ModalityKind::image, junk), InputError);
    const auto a = ModalityInput::from_bytes(ModalityKind::image, png);
    CHECK(a.digest() == sha256_hex(png));
}
