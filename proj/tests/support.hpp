#pragma once

// Shared helpers for the test suites: procedural scenes with analytic
// translation (no resampling error), Bayer mosaicking, and small utilities.

#include <cmath>
#include <vector>

#include "rawden/image.hpp"
#include "rawden/rng.hpp"

namespace testsup {

using rawden::BayerOffsets;
using rawden::BayerPhase;
using rawden::CfaFrame;
using rawden::Image;

// Smooth multi-frequency texture in [lo, hi], evaluated on a continuous
// plane so that shifted frames are exact translations of each other.
inline double texture_value(double x, double y, double lo, double hi)
{
    double v = 0.0;
    v += std::sin(0.11 * x + 0.23 * y);
    v += 0.8 * std::sin(0.41 * x - 0.19 * y + 1.3);
    v += 0.6 * std::sin(0.83 * x + 0.57 * y + 0.7);
    v += 0.5 * std::sin(1.61 * x - 1.13 * y + 2.1);
    v += 0.4 * std::sin(2.37 * x + 1.87 * y + 0.2);
    const double t = 0.5 + v / (2.0 * (1.0 + 0.8 + 0.6 + 0.5 + 0.4));
    return lo + t * (hi - lo);
}

inline Image textured_frame(int w, int h, double shift_x = 0.0, double shift_y = 0.0,
                            double lo = 0.0, double hi = 255.0)
{
    Image img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = static_cast<float>(texture_value(x + shift_x, y + shift_y, lo, hi));
    return img;
}

// Channel-correlated RGB scene: shared luma texture plus smooth chroma
// gradients, again analytic in (x, y) so temporal shifts are exact.
inline void scene_rgb(double x, double y, double lo, double hi, double rgb[3])
{
    const double luma = texture_value(x, y, 0.15, 0.85);
    const double cr = 0.12 * std::sin(0.021 * x + 0.5) + 0.08 * std::sin(0.047 * y);
    const double cb = 0.10 * std::cos(0.017 * y + 1.1) + 0.07 * std::sin(0.039 * x + 0.4);
    rgb[0] = lo + (hi - lo) * std::clamp(luma + cr, 0.02, 0.98);
    rgb[1] = lo + (hi - lo) * std::clamp(luma, 0.02, 0.98);
    rgb[2] = lo + (hi - lo) * std::clamp(luma + cb, 0.02, 0.98);
}

inline Image rgb_frame(int w, int h, double shift_x = 0.0, double shift_y = 0.0,
                       double lo = 0.0, double hi = 255.0)
{
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double rgb[3];
            scene_rgb(x + shift_x, y + shift_y, lo, hi, rgb);
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<float>(rgb[c]);
        }
    return img;
}

// Samples the RGB frame through the Bayer pattern.
inline CfaFrame mosaick(const Image& rgb, BayerPhase phase)
{
    const BayerOffsets o = rawden::bayer_offsets(phase);
    CfaFrame out;
    out.phase = phase;
    out.img = Image(rgb.width(), rgb.height(), 1);
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x) {
            int c = 1; // green
            if ((x & 1) == o.rx && (y & 1) == o.ry)
                c = 0;
            else if ((x & 1) == o.bx && (y & 1) == o.by)
                c = 2;
            out.img.at(x, y) = rgb.at(x, y, c);
        }
    return out;
}

inline Image random_frame(int w, int h, int channels, uint64_t seed, float lo, float hi)
{
    Image img(w, h, channels);
    for (size_t i = 0; i < img.size(); ++i) {
        const double u = rawden::rng::uniform(rawden::rng::key2(seed, i));
        img.data()[i] = lo + static_cast<float>(u) * (hi - lo);
    }
    return img;
}

inline Image random_integer_frame(int w, int h, uint64_t seed)
{
    Image img(w, h, 1);
    for (size_t i = 0; i < img.size(); ++i)
        img.data()[i] = static_cast<float>(rawden::rng::key2(seed, i) % 65536);
    return img;
}

inline double max_abs_diff(const Image& a, const Image& b)
{
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

inline double mean_sq_diff(const Image& a, const Image& b)
{
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

} // namespace testsup
