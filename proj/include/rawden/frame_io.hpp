#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rawden/image.hpp"

namespace rawden {

// 16-bit binary netpbm ("P5" graymap / "P6" pixmap, maxval 65535, big-endian
// samples). Values are rounded and clamped to [0, 65535] on write; the round
// trip is lossless for integer data in range.
Image read_netpbm(const std::string& path);
void write_netpbm(const std::string& path, const Image& img);

// Raw float container for intermediate frames: magic "RDF1", u32 LE
// width/height/channels, then the planes as 32-bit LE floats.
Image read_float_frame(const std::string& path);
void write_float_frame(const std::string& path, const Image& img);

// Per-sequence sidecar: CFA phase, sensor black level, white-balance gains
// for the R,G1,B,G2 planes and the nominal ISO. Optional fields cover the
// finishing ISP and a direct noise model.
struct Sidecar {
    BayerPhase phase = BayerPhase::RGGB;
    double black_level = 0.0;
    std::array<double, 4> wb_gains = {1.0, 1.0, 1.0, 1.0};
    double iso = 1600.0;
    double white_level = 65535.0;
    std::array<std::array<double, 3>, 3> ccm = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    double gamma = 2.2;
    std::optional<double> noise_a;
    std::optional<double> noise_b;
};

Sidecar read_sidecar(const std::string& path);
void write_sidecar(const std::string& path, const Sidecar& sidecar);

// Frames of a sequence, smallest-name first (all .pgm or .ppm in a directory).
std::vector<std::string> list_frames(const std::string& dir);

} // namespace rawden
