#include "groundchat/core/mask.hpp"

#include <numeric>
#include <string>

#include "groundchat/error.hpp"

namespace groundchat {

SegmentMask SegmentMask::from_bitmap(int width, int height, std::span<const std::uint8_t> bitmap) {
    if (width < 0 || height < 0) throw FormatError("mask dimensions must be non-negative", "mask");
    const auto total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bitmap.size() != total) {
        throw FormatError("bitmap length " + std::to_string(bitmap.size()) + " != " + std::to_string(width) + "x" +
                              std::to_string(height),
                          "mask");
    }
    SegmentMask mask;
    mask.width_ = width;
    mask.height_ = height;
    bool current = false;
    std::uint32_t run = 0;
    for (auto byte : bitmap) {
        const bool on = byte != 0;
        if (on != current) {
            mask.runs_.push_back(run);
            run = 0;
            current = on;
        }
        ++run;
    }
    if (total > 0) mask.runs_.push_back(run);
    return mask;
}

SegmentMask SegmentMask::from_runs(int width, int height, std::vector<std::uint32_t> runs) {
    if (width < 0 || height < 0) throw FormatError("mask dimensions must be non-negative", "mask");
    const auto total = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
    const auto sum = std::accumulate(runs.begin(), runs.end(), std::uint64_t{0});
    if (sum != total) {
        throw FormatError("mask runs sum to " + std::to_string(sum) + ", expected " + std::to_string(total), "mask");
    }
    // Canonical form: only the leading run may be zero-length.
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (runs[i] == 0) throw FormatError("mask run " + std::to_string(i) + " is empty", "mask");
    }
    SegmentMask mask;
    mask.width_ = width;
    mask.height_ = height;
    mask.runs_ = std::move(runs);
    return mask;
}

std::vector<std::uint8_t> SegmentMask::to_bitmap() const {
    std::vector<std::uint8_t> bitmap;
    bitmap.reserve(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_));
    std::uint8_t value = 0;
    for (auto run : runs_) {
        bitmap.insert(bitmap.end(), run, value);
        value ^= 1;
    }
    return bitmap;
}

std::size_t SegmentMask::area() const noexcept {
    std::size_t on = 0;
    for (std::size_t i = 1; i < runs_.size(); i += 2) on += runs_[i];
    return on;
}

} // namespace groundchat
