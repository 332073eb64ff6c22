#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace groundchat {

/// Binary mask stored as row-major run lengths. Runs alternate starting with
/// an "off" run (which may be zero-length), so the encoding of a bitmap is
/// unique and its hash stable.
class SegmentMask {
  public:
    SegmentMask() = default;

    /// Builds from a row-major bitmap; any non-zero byte counts as "on".
    static SegmentMask from_bitmap(int width, int height, std::span<const std::uint8_t> bitmap);

    /// Validates that the runs sum to width*height; throws FormatError.
    static SegmentMask from_runs(int width, int height, std::vector<std::uint32_t> runs);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::vector<std::uint32_t>& runs() const noexcept { return runs_; }

    /// Row-major 0/1 bitmap of length width*height.
    std::vector<std::uint8_t> to_bitmap() const;
    std::size_t area() const noexcept;

    bool operator==(const SegmentMask&) const = default;

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint32_t> runs_;
};

} // namespace groundchat
