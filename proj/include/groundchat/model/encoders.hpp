#pragma once

#include <memory>
#include <string>

#include "groundchat/core/types.hpp"
#include "groundchat/model/config.hpp"
#include "groundchat/model/tensor.hpp"

namespace groundchat::model {

/// Frozen modality encoder: media in, L_enc x D_enc features out. Encoders
/// are immutable after construction.
class ModalityEncoder {
  public:
    virtual ~ModalityEncoder() = default;
    virtual ModalityKind kind() const = 0;
    virtual std::size_t feature_dim() const = 0;
    virtual Matrix encode(const ModalityInput& input) const = 0;
    virtual std::string parameter_hash() const = 0;
    virtual std::string name() const = 0;
};

/// RGB -> bilinear resize -> per-channel normalization -> non-overlapping
/// patches -> tanh(patch * W + b + pos).
class ToyVisionEncoder final : public ModalityEncoder {
  public:
    explicit ToyVisionEncoder(const ModelConfig& config);

    ModalityKind kind() const override { return ModalityKind::image; }
    std::size_t feature_dim() const override { return dim_; }
    Matrix encode(const ModalityInput& input) const override;
    std::string parameter_hash() const override;
    std::string name() const override { return "toy-vision"; }

    /// (size*size) x 3 normalized pixels, row-major over the resized image.
    Matrix preprocess(const ModalityInput& input) const;

    static constexpr double kMean[3] = {0.48145466, 0.4578275, 0.40821073};
    static constexpr double kStd[3] = {0.26862954, 0.26130258, 0.27577711};

  private:
    int size_;
    int patch_;
    std::size_t dim_;
    Matrix weight_;
    RowVector bias_;
    Matrix position_;
};

/// Mono -> resample to the configured rate -> log-mel -> per-clip
/// standardization -> mean-pool into a fixed number of segments ->
/// tanh(mel * W + b + pos).
class ToyAudioEncoder final : public ModalityEncoder {
  public:
    explicit ToyAudioEncoder(const ModelConfig& config);

    ModalityKind kind() const override { return ModalityKind::audio; }
    std::size_t feature_dim() const override { return dim_; }
    Matrix encode(const ModalityInput& input) const override;
    std::string parameter_hash() const override;
    std::string name() const override { return "toy-audio"; }

    /// segments x n_mels pooled, standardized log-mel features.
    Matrix preprocess(const ModalityInput& input) const;

  private:
    media::MelConfig mel_;
    std::size_t segments_;
    std::size_t dim_;
    Matrix weight_;
    RowVector bias_;
    Matrix position_;
};

std::shared_ptr<const ModalityEncoder> make_toy_encoder(ModalityKind kind, const ModelConfig& config);

} // namespace groundchat::model
