#pragma once

#include <cstdint>
#include <vector>

namespace groundchat::media {

/// Seeded PNG with a few filled rectangles and ellipses on a flat
/// background. Distinct seeds give distinct payloads.
std::vector<std::uint8_t> synthetic_png(std::uint64_t seed, int width = 64, int height = 48);

/// Seeded 16-bit WAV: a sum of two or three tones with a smooth envelope.
std::vector<std::uint8_t> synthetic_wav(std::uint64_t seed, double seconds = 1.0, int sample_rate = 16000);

} // namespace groundchat::media
