#include <doctest.h>

#include <cmath>

#include "rawden/demosaic.hpp"
#include "support.hpp"

using namespace rawden;

namespace {

CfaFrame constant_cfa(int w, int h, float v, BayerPhase phase = BayerPhase::RGGB)
{
    CfaFrame f;
    f.phase = phase;
    f.img = Image(w, h, 1, v);
    return f;
}

// planar ramp: a shared affine luma plane with constant color offsets, the
// family of signals the Hamilton-Adams stencil reproduces exactly (the
// second-difference correction assumes locally constant color differences)
Image planar_rgb(int w, int h, double base, double gx, double gy, double off_r, double off_b)
{
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = base + gx * x + gy * y;
            img.at(x, y, 0) = static_cast<float>(g + off_r);
            img.at(x, y, 1) = static_cast<float>(g);
            img.at(x, y, 2) = static_cast<float>(g + off_b);
        }
    return img;
}

} // namespace

TEST_CASE("constants are fixed points of every direction and the combination")
{
    const CfaFrame cfa = constant_cfa(8, 8, 37.5f);
    for (Direction d : {Direction::North, Direction::South, Direction::East, Direction::West}) {
        const RgbFrame est = hamilton_adams_directional(cfa, d);
        for (size_t i = 0; i < est.size(); ++i)
            CHECK(est.data()[i] == doctest::Approx(37.5).epsilon(1e-6));
    }
    const RgbFrame out = demosaic(cfa);
    for (size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(37.5).epsilon(1e-6));
}

TEST_CASE("planar ramps are recovered exactly in the interior")
{
    for (BayerPhase phase : {BayerPhase::RGGB, BayerPhase::GRBG, BayerPhase::GBRG, BayerPhase::BGGR}) {
        // O(1) values keep float rounding below the tolerance
        const Image rgb = planar_rgb(16, 16, 0.3, 0.02, 0.013, 0.07, -0.05);
        const CfaFrame cfa = testsup::mosaick(rgb, phase);
        const RgbFrame out = demosaic(cfa);
        for (int y = 2; y < 14; ++y)
            for (int x = 2; x < 14; ++x)
                for (int c = 0; c < 3; ++c)
                    CHECK(std::abs(out.at(x, y, c) - rgb.at(x, y, c)) < 1e-6f);
    }
}

TEST_CASE("directional estimates match a brute-force stencil oracle")
{
    const Image rgb = testsup::rgb_frame(12, 12, 0, 0, 10.0, 200.0);
    const CfaFrame cfa = testsup::mosaick(rgb, BayerPhase::RGGB);
    const RgbFrame east = hamilton_adams_directional(cfa, Direction::East);

    // oracle: green at an R site, East one-sided Hamilton-Adams
    const Image& m = cfa.img;
    for (int y = 2; y < 10; y += 2)
        for (int x = 2; x < 10; x += 2) {
            const float g_oracle = m.at(x + 1, y) + 0.5f * (m.at(x, y) - m.at(x + 2, y));
            CHECK(east.at(x, y, 1) == doctest::Approx(g_oracle).epsilon(1e-6));
        }
}

TEST_CASE("horizontal step edge: E/W keep the edge, N/S blur it")
{
    // edge line runs horizontally: rows 0..3 dark, rows 4..7 bright
    Image rgb(8, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
                rgb.at(x, y, c) = y < 4 ? 10.f : 90.f;
    const CfaFrame cfa = testsup::mosaick(rgb, BayerPhase::RGGB);

    // along-row interpolation sees constant rows: exact everywhere
    for (Direction d : {Direction::East, Direction::West}) {
        const RgbFrame est = hamilton_adams_directional(cfa, d);
        for (int y = 0; y < 8; ++y)
            for (int x = 2; x < 6; ++x)
                CHECK(est.at(x, y, 1) == doctest::Approx(rgb.at(x, y, 1)).epsilon(1e-6));
    }

    // across-row stencils mix both plateaus at the boundary
    const RgbFrame north = hamilton_adams_directional(cfa, Direction::North);
    bool blurred = false;
    for (int x = 2; x < 6; ++x)
        for (int y = 3; y < 6; ++y) {
            const float v = north.at(x, y, 1);
            if (std::abs(v - 10.f) > 1.f && std::abs(v - 90.f) > 1.f)
                blurred = true;
        }
    CHECK(blurred);
}

TEST_CASE("combination weights: output is a convex combination of the directionals")
{
    const Image rgb = testsup::rgb_frame(16, 16, 0, 0, 20.0, 200.0);
    const CfaFrame cfa = testsup::mosaick(rgb, BayerPhase::RGGB);

    RgbFrame est[4];
    int k = 0;
    for (Direction d : {Direction::North, Direction::South, Direction::East, Direction::West})
        est[k++] = hamilton_adams_directional(cfa, d);
    const RgbFrame out = demosaic(cfa);

    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                float lo = est[0].at(x, y, c), hi = lo;
                for (int i = 1; i < 4; ++i) {
                    lo = std::min(lo, est[i].at(x, y, c));
                    hi = std::max(hi, est[i].at(x, y, c));
                }
                CHECK(out.at(x, y, c) >= lo - 1e-4f);
                CHECK(out.at(x, y, c) <= hi + 1e-4f);
            }
}

TEST_CASE("gray-world preservation on a low-curvature gray field")
{
    // gentle dome: curvature small enough that the stencil error stays
    // below the tolerance, yet the image is not an exact plane
    Image rgb(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double dx = (x - 15.5) / 16.0, dy = (y - 15.5) / 16.0;
            const float v = static_cast<float>(0.2 + 0.012 * x + 0.008 * y + 1e-4 * (dx * dx + dy * dy));
            for (int c = 0; c < 3; ++c)
                rgb.at(x, y, c) = v;
        }
    const CfaFrame cfa = testsup::mosaick(rgb, BayerPhase::RGGB);
    const RgbFrame out = demosaic(cfa);
    for (int y = 2; y < 30; ++y)
        for (int x = 2; x < 30; ++x) {
            CHECK(std::abs(out.at(x, y, 0) - out.at(x, y, 1)) < 1e-6f);
            CHECK(std::abs(out.at(x, y, 2) - out.at(x, y, 1)) < 1e-6f);
        }
}

TEST_CASE("demosaic of a real texture stays finite and near the data range")
{
    const Image rgb = testsup::rgb_frame(32, 32, 0, 0, 10.0, 240.0);
    const CfaFrame cfa = testsup::mosaick(rgb, BayerPhase::GRBG);
    const RgbFrame out = demosaic(cfa);
    for (size_t i = 0; i < out.size(); ++i) {
        CHECK(std::isfinite(out.data()[i]));
        CHECK(out.data()[i] > -50.f);
        CHECK(out.data()[i] < 300.f);
    }
}
