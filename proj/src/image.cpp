#include "rawden/image.hpp"

namespace rawden {

BayerPhase bayer_phase_from_string(const std::string& s)
{
    if (s == "RGGB") return BayerPhase::RGGB;
    if (s == "GRBG") return BayerPhase::GRBG;
    if (s == "GBRG") return BayerPhase::GBRG;
    if (s == "BGGR") return BayerPhase::BGGR;
    throw ConfigError("unknown Bayer phase '" + s + "'");
}

std::string to_string(BayerPhase phase)
{
    switch (phase) {
        case BayerPhase::RGGB: return "RGGB";
        case BayerPhase::GRBG: return "GRBG";
        case BayerPhase::GBRG: return "GBRG";
        case BayerPhase::BGGR: return "BGGR";
    }
    return "RGGB";
}

BayerOffsets bayer_offsets(BayerPhase phase)
{
    // B is always diagonal from R; G1 shares R's row.
    switch (phase) {
        case BayerPhase::RGGB: return {0, 0, 1, 0, 1, 1, 0, 1};
        case BayerPhase::GRBG: return {1, 0, 0, 0, 0, 1, 1, 1};
        case BayerPhase::GBRG: return {0, 1, 1, 1, 1, 0, 0, 0};
        case BayerPhase::BGGR: return {1, 1, 0, 1, 0, 0, 1, 0};
    }
    return {0, 0, 1, 0, 1, 1, 0, 1};
}

PackedFrame pack_cfa(const CfaFrame& frame)
{
    const Image& img = frame.img;
    if (img.channels() != 1)
        throw DimensionError("pack_cfa: CFA frame must be single-channel");
    if (img.width() % 2 != 0 || img.height() % 2 != 0)
        throw DimensionError("pack_cfa: CFA dimensions must be even, got " +
                             std::to_string(img.width()) + "x" + std::to_string(img.height()));

    const BayerOffsets o = bayer_offsets(frame.phase);
    const int pw = img.width() / 2;
    const int ph = img.height() / 2;
    PackedFrame out(pw, ph, 4);

    const int ox[4] = {o.rx, o.g1x, o.bx, o.g2x};
    const int oy[4] = {o.ry, o.g1y, o.by, o.g2y};
    for (int c = 0; c < 4; ++c) {
        float* plane = out.plane(c);
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x)
                plane[static_cast<size_t>(y) * pw + x] = img.at(2 * x + ox[c], 2 * y + oy[c]);
    }
    return out;
}

CfaFrame unpack_cfa(const PackedFrame& packed, BayerPhase phase)
{
    if (packed.channels() != 4)
        throw DimensionError("unpack_cfa: packed frame must have 4 channels");

    const BayerOffsets o = bayer_offsets(phase);
    CfaFrame out;
    out.phase = phase;
    out.img = Image(packed.width() * 2, packed.height() * 2, 1);

    const int ox[4] = {o.rx, o.g1x, o.bx, o.g2x};
    const int oy[4] = {o.ry, o.g1y, o.by, o.g2y};
    for (int c = 0; c < 4; ++c) {
        const float* plane = packed.plane(c);
        for (int y = 0; y < packed.height(); ++y)
            for (int x = 0; x < packed.width(); ++x)
                out.img.at(2 * x + ox[c], 2 * y + oy[c]) = plane[static_cast<size_t>(y) * packed.width() + x];
    }
    return out;
}

} // namespace rawden
