#include "groundchat/media/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "groundchat/error.hpp"

namespace groundchat::media {

cv::Mat decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw InputError("image payload is empty", "decode");
    const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw InputError(std::string("image decode failed: ") + e.what(), "decode");
    }
    if (bgr.empty()) throw InputError("image decode failed", "decode");
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return rgb;
}

cv::Mat decode_image(const ModalityInput& input) {
    if (input.kind() != ModalityKind::image) throw InputError("expected an image input", "decode");
    return decode_image(input.payload());
}

std::vector<std::uint8_t> encode_png(const cv::Mat& rgb) {
    cv::Mat bgr;
    if (rgb.channels() == 3) {
        cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    } else {
        bgr = rgb;
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) throw InputError("png encode failed", "encode");
    return out;
}

std::vector<std::uint8_t> encode_mask_png(const SegmentMask& mask) {
    auto bitmap = mask.to_bitmap();
    for (auto& b : bitmap) b = b ? 255 : 0;
    const cv::Mat gray(mask.height(), mask.width(), CV_8UC1, bitmap.data());
    std::vector<std::uint8_t> out;
    const std::vector<int> params = {cv::IMWRITE_PNG_BILEVEL, 1};
    if (!cv::imencode(".png", gray, out, params)) throw InputError("mask png encode failed", "encode");
    return out;
}

SegmentMask decode_mask_png(std::span<const std::uint8_t> bytes) {
    const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat gray = cv::imdecode(raw, cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw InputError("mask png decode failed", "decode");
    std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(gray.rows) * static_cast<std::size_t>(gray.cols));
    for (int y = 0; y < gray.rows; ++y) {
        for (int x = 0; x < gray.cols; ++x) {
            bitmap[static_cast<std::size_t>(y) * static_cast<std::size_t>(gray.cols) + static_cast<std::size_t>(x)] =
                gray.at<std::uint8_t>(y, x) >= 128 ? 1 : 0;
        }
    }
    return SegmentMask::from_bitmap(gray.cols, gray.rows, bitmap);
}

} // namespace groundchat::media
