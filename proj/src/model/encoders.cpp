#include "groundchat/model/encoders.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "groundchat/core/digest.hpp"
#include "groundchat/error.hpp"
#include "groundchat/media/audio.hpp"
#include "groundchat/media/image.hpp"

namespace groundchat::model {

namespace {

// Distinct sub-seeds so the components stay independent of each other.
constexpr std::uint64_t kVisionSalt = 0x76697369;
constexpr std::uint64_t kAudioSalt = 0x61756469;

} // namespace

ToyVisionEncoder::ToyVisionEncoder(const ModelConfig& config)
    : size_(config.image_size), patch_(config.patch_size), dim_(config.encoder_dim) {
    validate(config);
    Rng rng(config.seed ^ kVisionSalt);
    const auto patch_dim = static_cast<Eigen::Index>(patch_ * patch_ * 3);
    const auto tokens = static_cast<Eigen::Index>((size_ / patch_) * (size_ / patch_));
    const auto d = static_cast<Eigen::Index>(dim_);
    weight_ = random_normal(patch_dim, d, 1.0 / std::sqrt(static_cast<double>(patch_dim)), rng);
    bias_ = random_normal(1, d, 0.1, rng);
    position_ = random_normal(tokens, d, 0.1, rng);
}

Matrix ToyVisionEncoder::preprocess(const ModalityInput& input) const {
    const cv::Mat rgb = media::decode_image(input);
    cv::Mat resized;
    cv::resize(rgb, resized, cv::Size(size_, size_), 0.0, 0.0, cv::INTER_LINEAR);
    Matrix pixels(static_cast<Eigen::Index>(size_) * size_, 3);
    for (int y = 0; y < size_; ++y) {
        for (int x = 0; x < size_; ++x) {
            const auto& px = resized.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) {
                pixels(y * size_ + x, c) = (px[c] / 255.0 - kMean[c]) / kStd[c];
            }
        }
    }
    return pixels;
}

Matrix ToyVisionEncoder::encode(const ModalityInput& input) const {
    if (input.kind() != ModalityKind::image) throw InputError("vision encoder expects an image", "encode");
    const Matrix pixels = preprocess(input);
    const int grid = size_ / patch_;
    Matrix patches(static_cast<Eigen::Index>(grid) * grid, static_cast<Eigen::Index>(patch_) * patch_ * 3);
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            Eigen::Index col = 0;
            for (int py = 0; py < patch_; ++py) {
                for (int px = 0; px < patch_; ++px) {
                    const int row = (gy * patch_ + py) * size_ + gx * patch_ + px;
                    for (int c = 0; c < 3; ++c) patches(gy * grid + gx, col++) = pixels(row, c);
                }
            }
        }
    }
    Matrix pre = patches * weight_;
    pre.rowwise() += bias_;
    pre += position_;
    return pre.array().tanh().matrix();
}

std::string ToyVisionEncoder::parameter_hash() const {
    Sha256 h;
    hash_into(h, weight_);
    hash_into(h, bias_);
    hash_into(h, position_);
    return h.finish();
}

ToyAudioEncoder::ToyAudioEncoder(const ModelConfig& config)
    : mel_(config.mel), segments_(config.audio_tokens), dim_(config.encoder_dim) {
    validate(config);
    Rng rng(config.seed ^ kAudioSalt);
    const auto mels = static_cast<Eigen::Index>(mel_.n_mels);
    const auto d = static_cast<Eigen::Index>(dim_);
    weight_ = random_normal(mels, d, 1.0 / std::sqrt(static_cast<double>(mels)), rng);
    bias_ = random_normal(1, d, 0.1, rng);
    position_ = random_normal(static_cast<Eigen::Index>(segments_), d, 0.1, rng);
}

Matrix ToyAudioEncoder::preprocess(const ModalityInput& input) const {
    const auto clip = media::resample(media::decode_audio(input), mel_.sample_rate);
    const Eigen::MatrixXd logmel = media::log_mel_spectrogram(clip, mel_);
    const double mean = logmel.mean();
    const double var = (logmel.array() - mean).square().mean();
    const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;

    const auto frames = static_cast<std::size_t>(logmel.rows());
    Matrix pooled(static_cast<Eigen::Index>(segments_), logmel.cols());
    for (std::size_t s = 0; s < segments_; ++s) {
        // Segment s covers frames [s*F/S, (s+1)*F/S); short clips reuse frames.
        std::size_t lo = s * frames / segments_;
        std::size_t hi = (s + 1) * frames / segments_;
        if (hi <= lo) hi = lo + 1;
        lo = std::min(lo, frames - 1);
        hi = std::min(hi, frames);
        const auto block = logmel.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo));
        pooled.row(static_cast<Eigen::Index>(s)) = ((block.colwise().mean().array() - mean) * scale).matrix();
    }
    return pooled;
}

Matrix ToyAudioEncoder::encode(const ModalityInput& input) const {
    if (input.kind() != ModalityKind::audio) throw InputError("audio encoder expects audio", "encode");
    Matrix pre = preprocess(input) * weight_;
    pre.rowwise() += bias_;
    pre += position_;
    return pre.array().tanh().matrix();
}

std::string ToyAudioEncoder::parameter_hash() const {
    Sha256 h;
    hash_into(h, weight_);
    hash_into(h, bias_);
    hash_into(h, position_);
    return h.finish();
}

std::shared_ptr<const ModalityEncoder> make_toy_encoder(ModalityKind kind, const ModelConfig& config) {
    if (kind == ModalityKind::image) return std::make_shared<ToyVisionEncoder>(config);
    return std::make_shared<ToyAudioEncoder>(config);
}

} // namespace groundchat::model
