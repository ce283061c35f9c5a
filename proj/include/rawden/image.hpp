#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rawden/errors.hpp"

namespace rawden {

// Which of the four 2x2 CFA offsets holds red. G1 is the green sharing a
// row with R, G2 the one sharing a row with B.
enum class BayerPhase { RGGB, GRBG, GBRG, BGGR };

BayerPhase bayer_phase_from_string(const std::string& s);
std::string to_string(BayerPhase phase);

// Planar float image, plane-major storage. Frames are immutable once built
// by an operation; concurrent readers are safe.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.f)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill)
    {
        if (width <= 0 || height <= 0 || channels <= 0)
            throw DimensionError("image dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    size_t plane_size() const { return static_cast<size_t>(width_) * height_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(int x, int y, int c = 0) { return data_[plane_size() * c + static_cast<size_t>(y) * width_ + x]; }
    float at(int x, int y, int c = 0) const { return data_[plane_size() * c + static_cast<size_t>(y) * width_ + x]; }

    float* plane(int c) { return data_.data() + plane_size() * c; }
    const float* plane(int c) const { return data_.data() + plane_size() * c; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    bool same_shape(const Image& o) const
    {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

// Single-channel mosaicked frame plus its CFA phase. Values are real; they
// may be negative after black-level subtraction.
struct CfaFrame {
    Image img;   // 1 channel
    BayerPhase phase = BayerPhase::RGGB;
};

// Half-resolution 4-channel image, planes ordered R, G1, B, G2.
using PackedFrame = Image;

// 3-channel R, G, B image.
using RgbFrame = Image;

// Per-pixel boolean validity mask; true = occluded/invalid.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> occluded;

    Mask() = default;
    Mask(int w, int h, uint8_t fill = 0) : width(w), height(h), occluded(static_cast<size_t>(w) * h, fill) {}
    bool at(int x, int y) const { return occluded[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { occluded[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    bool empty() const { return occluded.empty(); }
};

// (dx, dy) offsets of the R, G1, B, G2 sites inside the 2x2 CFA tile.
struct BayerOffsets {
    int rx, ry, g1x, g1y, bx, by, g2x, g2y;
};
BayerOffsets bayer_offsets(BayerPhase phase);

PackedFrame pack_cfa(const CfaFrame& frame);
CfaFrame unpack_cfa(const PackedFrame& packed, BayerPhase phase);

} // namespace rawden
