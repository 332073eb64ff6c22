#include "groundchat/media/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <opencv2/imgproc.hpp>

#include "groundchat/error.hpp"
#include "groundchat/media/audio.hpp"
#include "groundchat/media/image.hpp"

namespace groundchat::media {

std::vector<std::uint8_t> synthetic_png(std::uint64_t seed, int width, int height) {
    if (width <= 0 || height <= 0) throw PreconditionError("image size must be positive", "synthetic");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> channel(0, 255);
    auto color = [&] { return cv::Scalar(channel(rng), channel(rng), channel(rng)); };
    cv::Mat img(height, width, CV_8UC3, color());
    std::uniform_int_distribution<int> shapes(2, 4);
    std::uniform_int_distribution<int> px(0, width - 1);
    std::uniform_int_distribution<int> py(0, height - 1);
    const int n = shapes(rng);
    for (int i = 0; i < n; ++i) {
        const cv::Point a(px(rng), py(rng));
        const cv::Point b(px(rng), py(rng));
        if (rng() % 2 == 0) {
            cv::rectangle(img, a, b, color(), cv::FILLED);
        } else {
            const cv::Size axes(std::max(1, std::abs(b.x - a.x) / 2), std::max(1, std::abs(b.y - a.y) / 2));
            cv::ellipse(img, a, axes, 0.0, 0.0, 360.0, color(), cv::FILLED);
        }
    }
    return encode_png(img);
}

std::vector<std::uint8_t> synthetic_wav(std::uint64_t seed, double seconds, int sample_rate) {
    if (!(seconds > 0.0) || sample_rate <= 0) throw PreconditionError("clip length and rate must be positive", "synthetic");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> freq(110.0, 3000.0);
    std::uniform_real_distribution<double> amp(0.1, 0.3);
    const int tones = 2 + static_cast<int>(rng() % 2);
    std::vector<double> f(tones), a(tones);
    for (int i = 0; i < tones; ++i) {
        f[i] = freq(rng);
        a[i] = amp(rng);
    }
    AudioClip clip;
    clip.sample_rate = sample_rate;
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    clip.samples.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double t = static_cast<double>(s) / sample_rate;
        const double env = std::sin(std::numbers::pi * static_cast<double>(s) / static_cast<double>(n));
        double v = 0.0;
        for (int i = 0; i < tones; ++i) v += a[i] * std::sin(2.0 * std::numbers::pi * f[i] * t);
        clip.samples[s] = static_cast<float>(env * v);
    }
    return encode_wav(clip);
}

} // namespace groundchat::media
