#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "groundchat/core/types.hpp"
#include "groundchat/datasets/dataset.hpp"
#include "groundchat/grounding/adapters.hpp"

namespace groundchat::fixtures {

/// 96x72 lawn with a brown dog block at kDogBox and a red frisbee disc
/// inscribed in kFrisbeeBox.
std::vector<std::uint8_t> dog_scene_png();
/// Uniform gray 64x48 image.
std::vector<std::uint8_t> blank_png();

inline constexpr BoundingBox kDogBox{12, 24, 52, 64};
inline constexpr BoundingBox kFrisbeeBox{60, 8, 88, 36};
inline constexpr const char* kDogReply = "A dog catches a frisbee on the grass.";

struct MediaItem {
    ModalityInput input;
    std::string caption;
    std::string source_id;
};

/// Everything derived in memory; `write` puts it on disk.
struct FixtureSet {
    ModalityInput dog_image;
    ModalityInput blank_image;
    std::vector<MediaItem> images; // captioned synthetic images
    std::vector<MediaItem> audios; // captioned synthetic clips, same source ids
    std::vector<datasets::CaptionBundle> bundles;
    std::vector<datasets::LabeledPair> pairs;
    grounding::MockTable mocks;
};

FixtureSet make_fixtures();

struct FixturePaths {
    std::filesystem::path root;
    std::filesystem::path media;       // content-addressed store
    std::filesystem::path mocks;       // mocks.json
    std::filesystem::path config;      // config.json pointing at the mocks
    std::filesystem::path dog_image;   // dog.png
    std::filesystem::path blank_image; // blank.png
    std::filesystem::path audio;       // clip-0.wav
    std::filesystem::path image_captions;
    std::filesystem::path audio_captions;
    std::filesystem::path bundles;
    std::filesystem::path pairs;
};

/// Writes media files, the media store, mocks.json, config.json and the
/// caption/bundle/pair dataset manifests under `dir`.
FixturePaths write_fixtures(const FixtureSet& set, const std::filesystem::path& dir);

} // namespace groundchat::fixtures
