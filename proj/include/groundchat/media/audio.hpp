#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "groundchat/core/types.hpp"

namespace groundchat::media {

struct AudioClip {
    int sample_rate = 16000;
    std::vector<float> samples; // mono, [-1, 1]
};

/// Decodes PCM (8/16/24/32-bit) or IEEE-float WAV and downmixes to mono.
/// FLAC and MP3 payloads are recognized but not decodable in this build.
AudioClip decode_audio(const ModalityInput& input);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// 16-bit PCM mono WAV.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

/// Linear-interpolation resampler.
AudioClip resample(const AudioClip& clip, int target_rate);

struct MelConfig {
    int sample_rate = 16000;
    int n_fft = 400; // 25 ms
    int hop = 160;   // 10 ms
    int n_mels = 32;

    bool operator==(const MelConfig&) const = default;
};

/// Frames x n_mels natural-log mel energies of a clip already at
/// `config.sample_rate`. Clips shorter than one window are zero-padded.
Eigen::MatrixXd log_mel_spectrogram(const AudioClip& clip, const MelConfig& config);

/// Triangular HTK-style filterbank, n_mels x (n_fft/2 + 1).
Eigen::MatrixXd mel_filterbank(const MelConfig& config);

} // namespace groundchat::media
