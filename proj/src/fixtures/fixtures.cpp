#include "groundchat/fixtures.hpp"

#include <fstream>

#include <opencv2/imgproc.hpp>

#include "groundchat/core/serialization.hpp"
#include "groundchat/error.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/media/synthetic.hpp"

namespace groundchat::fixtures {

namespace fs = std::filesystem;

namespace {

constexpr const char* kImageCaptions[] = {
    "a red car on the street",       "two birds in a tree",       "a man playing the guitar",
    "a bowl of fruit on a table",    "a cat sitting near a window", "a boat on the river",
    "children running in the park",  "a black horse in a field",
};

constexpr const char* kAudioCaptions[] = {
    "a dog barking loudly",         "rain falling on a roof",  "a bell ringing",
    "people talking in a crowd",    "a car engine running",    "birds chirping in the morning",
    "a piano playing a soft melody", "thunder in a storm",
};

constexpr const char* kPairLabels[] = {"dog barking", "rain falling", "bell ringing", "people talking",
                                       "car engine",  "birds chirping", "piano playing", "thunder"};

const std::vector<std::vector<std::string>> kBundleCaptions = {
    {"A dog is barking loudly.", "A dog barks again and again.", "Someone walks while a dog barks.",
     "A small dog barks near a house.", "A dog barks and a person talks."},
    {"Rain is falling on a roof.", "Water drips from the roof in the rain.", "A storm with rain and thunder.",
     "Heavy rain falls on the street.", "Rain falls while the wind blows."},
    {"A bell is ringing.", "Bells chime in the distance.", "A church bell rings three times.",
     "A small bell rings softly.", "Bells ring and people talk."},
    {"People are talking in a crowd.", "A crowd of people speaking.", "Voices of people in a room.",
     "A man and a woman talking.", "Children and people talking loudly."},
};

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("cannot write " + path.string(), "fixtures");
}

} // namespace

std::vector<std::uint8_t> dog_scene_png() {
    cv::Mat img(72, 96, CV_8UC3, cv::Scalar(70, 150, 60));
    cv::rectangle(img, cv::Point(12, 24), cv::Point(51, 63), cv::Scalar(120, 80, 40), cv::FILLED);
    cv::ellipse(img, cv::Point(74, 22), cv::Size(13, 13), 0.0, 0.0, 360.0, cv::Scalar(220, 30, 30), cv::FILLED);
    return media::encode_png(img);
}

std::vector<std::uint8_t> blank_png() {
    cv::Mat img(48, 64, CV_8UC3, cv::Scalar(128, 128, 128));
    return media::encode_png(img);
}

FixtureSet make_fixtures() {
    FixtureSet set{ModalityInput::from_bytes(ModalityKind::image, dog_scene_png()),
                   ModalityInput::from_bytes(ModalityKind::image, blank_png()),
                   {}, {}, {}, {}, {}};
    for (std::size_t i = 0; i < std::size(kImageCaptions); ++i) {
        const std::string source = "clip-" + std::to_string(i);
        set.images.push_back({ModalityInput::from_bytes(ModalityKind::image, media::synthetic_png(100 + i)),
                              kImageCaptions[i], source});
        set.audios.push_back({ModalityInput::from_bytes(ModalityKind::audio, media::synthetic_wav(200 + i)),
                              kAudioCaptions[i], source});
    }
    for (std::size_t i = 0; i < kBundleCaptions.size(); ++i) {
        set.bundles.push_back({MediaRef::of(set.audios[i].input), kBundleCaptions[i], set.audios[i].source_id});
    }
    for (std::size_t i = 0; i < std::size(kPairLabels); ++i) {
        set.pairs.push_back({MediaRef::of(set.audios[i].input), MediaRef::of(set.images[i].input), kPairLabels[i],
                             set.audios[i].source_id});
    }

    auto& m = set.mocks;
    const auto& dog = set.dog_image.digest();
    m.tags[dog] = {{"dog", 0.92}, {"frisbee", 0.81}, {"grass", 0.66}, {"Dog", 0.55}, {"sky", 0.2}};
    m.detections[dog] = {{"dog", kDogBox, 0.88},
                         {"frisbee", kFrisbeeBox, 0.79},
                         {"dog", {12, 24, 52, 63}, 0.40},
                         {"grass", {0, 0, 96, 72}, 0.12}};
    m.replies[dog] = kDogReply;
    m.replies[set.audios[0].input.digest()] = "A dog is barking loudly.";
    m.replies[dog + "+" + set.audios[0].input.digest()] = "The dog in the picture is making the sound.";
    m.replies[dog + "+" + set.audios[1].input.digest()] =
        "The image shows a dog catching a frisbee. The audio is rain falling on a roof.";
    for (const auto& item : set.images) m.replies[item.input.digest()] = "The picture shows " + item.caption + ".";
    for (const auto& item : set.audios) {
        if (!m.replies.contains(item.input.digest())) m.replies[item.input.digest()] = "I can hear " + item.caption + ".";
    }
    return set;
}

FixturePaths write_fixtures(const FixtureSet& set, const fs::path& dir) {
    FixturePaths p;
    p.root = dir;
    p.media = dir / "media";
    p.mocks = dir / "mocks.json";
    p.config = dir / "config.json";
    p.dog_image = dir / "dog.png";
    p.blank_image = dir / "blank.png";
    p.audio = dir / "clip-0.wav";
    fs::create_directories(dir);

    write_bytes(p.dog_image, set.dog_image.payload());
    write_bytes(p.blank_image, set.blank_image.payload());
    write_bytes(p.audio, set.audios.front().input.payload());
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        write_bytes(dir / "images" / ("image-" + std::to_string(i) + ".png"), set.images[i].input.payload());
        write_bytes(dir / "audio" / ("clip-" + std::to_string(i) + ".wav"), set.audios[i].input.payload());
    }

    datasets::MediaStore store(p.media);
    store.put(set.dog_image);
    store.put(set.blank_image);
    std::vector<datasets::CaptionRecord> image_records;
    std::vector<datasets::CaptionRecord> audio_records;
    for (const auto& item : set.images) image_records.push_back({store.put(item.input), item.caption, item.source_id});
    for (const auto& item : set.audios) audio_records.push_back({store.put(item.input), item.caption, item.source_id});

    const fs::path data = dir / "datasets";
    p.image_captions = datasets::write_dataset(
        data, {1, "image-captions", datasets::DatasetKind::image_text, "caption", 0, {"synthetic"}, {}, {}},
        datasets::to_records(image_records));
    p.audio_captions = datasets::write_dataset(
        data, {1, "audio-captions", datasets::DatasetKind::audio_text, "caption", 0, {"synthetic"}, {}, {}},
        datasets::to_records(audio_records));
    p.bundles = datasets::write_dataset(
        data, {1, "caption-bundles", datasets::DatasetKind::audio_text, "bundle", 0, {"synthetic"}, {}, {}},
        datasets::to_records(set.bundles));
    p.pairs = datasets::write_dataset(
        data, {1, "labeled-pairs", datasets::DatasetKind::audio_image_text, "pair", 0, {"synthetic"}, {}, {}},
        datasets::to_records(set.pairs));

    {
        std::ofstream out(p.mocks, std::ios::trunc);
        out << set.mocks.to_json().dump(2) << '\n';
    }
    {
        const Json config = {{"seed", 7},
                             {"adapters", {{"mocks", "mocks.json"}, {"segmenter", "box"}, {"llm", "echo"}}},
                             {"service", {{"host", "127.0.0.1"}, {"port", 0}}}};
        std::ofstream out(p.config, std::ios::trunc);
        out << config.dump(2) << '\n';
    }
    return p;
}

} // namespace groundchat::fixtures
