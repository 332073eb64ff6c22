#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <opencv2/core.hpp>

#include "groundchat/core/types.hpp"

namespace groundchat::media {

/// Decodes a PNG/JPEG payload to an 8-bit RGB image; throws InputError.
cv::Mat decode_image(const ModalityInput& input);
cv::Mat decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const cv::Mat& rgb);

/// 1-bit grayscale PNG of the mask (on = 255).
std::vector<std::uint8_t> encode_mask_png(const SegmentMask& mask);
SegmentMask decode_mask_png(std::span<const std::uint8_t> bytes);

} // namespace groundchat::media
