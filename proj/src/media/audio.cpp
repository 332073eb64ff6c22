#include "groundchat/media/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <string>

#include "groundchat/error.hpp"

namespace groundchat::media {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

float decode_sample(std::span<const std::uint8_t> b, std::size_t at, int bits, bool is_float) {
    switch (bits) {
    case 8: return (static_cast<float>(b[at]) - 128.0f) / 128.0f;
    case 16: return static_cast<float>(static_cast<std::int16_t>(read_u16(b, at))) / 32768.0f;
    case 24: {
        std::int32_t v = b[at] | (b[at + 1] << 8) | (b[at + 2] << 16);
        if (v & 0x800000) v |= ~0xFFFFFF;
        return static_cast<float>(v) / 8388608.0f;
    }
    case 32:
        if (is_float) {
            const std::uint32_t raw = read_u32(b, at);
            float f = 0.0f;
            std::memcpy(&f, &raw, sizeof f);
            return f;
        }
        return static_cast<float>(static_cast<std::int32_t>(read_u32(b, at))) / 2147483648.0f;
    default: throw InputError("unsupported WAV bit depth " + std::to_string(bits), "decode");
    }
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

AudioClip decode_wav(std::span<const std::uint8_t> b) {
    if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
        throw InputError("not a RIFF/WAVE payload", "decode");
    }
    int channels = 0;
    int rate = 0;
    int bits = 0;
    bool is_float = false;
    std::span<const std::uint8_t> data;
    std::size_t at = 12;
    while (at + 8 <= b.size()) {
        const std::uint32_t size = read_u32(b, at + 4);
        const std::size_t body = at + 8;
        if (body + size > b.size()) throw InputError("truncated WAV chunk", "decode");
        if (std::memcmp(b.data() + at, "fmt ", 4) == 0) {
            if (size < 16) throw InputError("WAV fmt chunk too short", "decode");
            std::uint16_t tag = read_u16(b, body);
            channels = read_u16(b, body + 2);
            rate = static_cast<int>(read_u32(b, body + 4));
            bits = read_u16(b, body + 14);
            if (tag == 0xFFFE && size >= 26) tag = read_u16(b, body + 24); // WAVE_FORMAT_EXTENSIBLE subformat
            if (tag != 1 && tag != 3) throw InputError("unsupported WAV encoding " + std::to_string(tag), "decode");
            is_float = tag == 3;
        } else if (std::memcmp(b.data() + at, "data", 4) == 0) {
            data = b.subspan(body, size);
        }
        at = body + size + (size & 1);
    }
    if (channels <= 0 || rate <= 0 || bits == 0) throw InputError("WAV has no usable fmt chunk", "decode");
    if (data.empty()) throw InputError("WAV has no samples", "decode");
    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * static_cast<std::size_t>(bits / 8);
    if (frame_bytes == 0) throw InputError("invalid WAV frame size", "decode");
    const std::size_t frames = data.size() / frame_bytes;
    if (frames == 0) throw InputError("WAV has no samples", "decode");

    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        float sum = 0.0f;
        for (int c = 0; c < channels; ++c) {
            sum += decode_sample(data, f * frame_bytes + static_cast<std::size_t>(c) * (bits / 8), bits, is_float);
        }
        clip.samples[f] = sum / static_cast<float>(channels);
    }
    return clip;
}

AudioClip decode_audio(const ModalityInput& input) {
    if (input.kind() != ModalityKind::audio) throw InputError("expected an audio input", "decode");
    switch (input.format()) {
    case MediaFormat::wav: return decode_wav(input.payload());
    case MediaFormat::flac:
    case MediaFormat::mp3:
        throw InputError(std::string(to_string(input.format())) + " decoding is not supported by this build", "decode");
    default: throw InputError("not an audio format", "decode");
    }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
    std::vector<std::uint8_t> out;
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_bytes);
    for (float s : clip.samples) {
        const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f));
        put_u16(out, static_cast<std::uint16_t>(v));
    }
    return out;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0 || clip.sample_rate <= 0) throw InputError("invalid sample rate", "resample");
    if (clip.sample_rate == target_rate || clip.samples.empty()) {
        AudioClip copy = clip;
        copy.sample_rate = target_rate;
        return copy;
    }
    const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
    const auto n_out = static_cast<std::size_t>(
        std::max<double>(1.0, std::floor(static_cast<double>(clip.samples.size()) / ratio)));
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out);
    const std::size_t last = clip.samples.size() - 1;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double src = static_cast<double>(i) * ratio;
        const auto lo = std::min(static_cast<std::size_t>(src), last);
        const auto hi = std::min(lo + 1, last);
        const double frac = src - static_cast<double>(lo);
        out.samples[i] = static_cast<float>((1.0 - frac) * clip.samples[lo] + frac * clip.samples[hi]);
    }
    return out;
}

Eigen::MatrixXd mel_filterbank(const MelConfig& c) {
    const int bins = c.n_fft / 2 + 1;
    auto hz_to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto mel_to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
    const double mel_max = hz_to_mel(c.sample_rate / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(c.n_mels + 2));
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(c.n_mels + 1));
    }
    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(c.n_mels, bins);
    for (int m = 0; m < c.n_mels; ++m) {
        const double lo = edges[static_cast<std::size_t>(m)];
        const double mid = edges[static_cast<std::size_t>(m) + 1];
        const double hi = edges[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < bins; ++k) {
            const double hz = static_cast<double>(k) * c.sample_rate / c.n_fft;
            if (hz > lo && hz < hi) fb(m, k) = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
        }
    }
    return fb;
}

Eigen::MatrixXd log_mel_spectrogram(const AudioClip& clip, const MelConfig& c) {
    if (clip.sample_rate != c.sample_rate) throw InputError("clip must be resampled before feature extraction", "features");
    if (clip.samples.empty()) throw InputError("audio clip is empty", "features");
    const std::size_t n = clip.samples.size();
    const auto n_fft = static_cast<std::size_t>(c.n_fft);
    const auto hop = static_cast<std::size_t>(c.hop);
    const std::size_t frames = n <= n_fft ? 1 : 1 + (n - n_fft) / hop;
    const int bins = c.n_fft / 2 + 1;

    std::vector<double> window(n_fft);
    for (std::size_t i = 0; i < n_fft; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_fft));
    }

    double* in = fftw_alloc_real(n_fft);
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(bins));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(c.n_fft, in, out, FFTW_ESTIMATE);
    }

    Eigen::MatrixXd power(static_cast<Eigen::Index>(frames), bins);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < n_fft; ++i) {
            const std::size_t s = f * hop + i;
            in[i] = s < n ? static_cast<double>(clip.samples[s]) * window[i] : 0.0;
        }
        fftw_execute(plan);
        for (int k = 0; k < bins; ++k) {
            power(static_cast<Eigen::Index>(f), k) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);

    Eigen::MatrixXd mel = power * mel_filterbank(c).transpose();
    return (mel.array() + 1e-10).log().matrix();
}

} // namespace groundchat::media
