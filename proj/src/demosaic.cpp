#include "rawden/demosaic.hpp"

#include <array>
#include <cmath>

namespace rawden {

namespace {

// whole-sample symmetric reflection
inline int refl(int i, int n)
{
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

struct SiteMap {
    int rx, ry, bx, by;
    bool is_r(int x, int y) const { return (x & 1) == rx && (y & 1) == ry; }
    bool is_b(int x, int y) const { return (x & 1) == bx && (y & 1) == by; }
};

SiteMap site_map(BayerPhase phase)
{
    const BayerOffsets o = bayer_offsets(phase);
    return {o.rx, o.ry, o.bx, o.by};
}

struct Dir {
    int dx, dy;
};

Dir dir_vector(Direction d)
{
    switch (d) {
        case Direction::North: return {0, -1};
        case Direction::South: return {0, 1};
        case Direction::East: return {1, 0};
        case Direction::West: return {-1, 0};
    }
    return {1, 0};
}

// Interpolates the color-difference plane sampled on the lattice
// (x % 2 == cx, y % 2 == cy) to full resolution: first along rows holding
// samples, then across rows.
void fill_difference(std::vector<float>& d, int w, int h, int cx, int cy)
{
    for (int y = cy; y < h; y += 2)
        for (int x = 1 - cx; x < w; x += 2) {
            const float a = d[static_cast<size_t>(y) * w + refl(x - 1, w)];
            const float b = d[static_cast<size_t>(y) * w + refl(x + 1, w)];
            d[static_cast<size_t>(y) * w + x] = 0.5f * (a + b);
        }
    for (int y = 1 - cy; y < h; y += 2)
        for (int x = 0; x < w; ++x) {
            const float a = d[static_cast<size_t>(refl(y - 1, h)) * w + x];
            const float b = d[static_cast<size_t>(refl(y + 1, h)) * w + x];
            d[static_cast<size_t>(y) * w + x] = 0.5f * (a + b);
        }
}

} // namespace

RgbFrame hamilton_adams_directional(const CfaFrame& cfa, Direction direction)
{
    const Image& img = cfa.img;
    if (img.channels() != 1)
        throw DimensionError("hamilton_adams_directional: CFA must be single-channel");
    if (img.width() % 2 != 0 || img.height() % 2 != 0)
        throw DimensionError("hamilton_adams_directional: CFA dimensions must be even");

    const int w = img.width(), h = img.height();
    const SiteMap site = site_map(cfa.phase);
    const Dir d = dir_vector(direction);
    const float* v = img.plane(0);
    auto at = [&](int x, int y) { return v[static_cast<size_t>(refl(y, h)) * w + refl(x, w)]; };

    RgbFrame out(w, h, 3);
    float* g = out.plane(1);

    // green: one-sided Hamilton-Adams along the direction at R and B sites
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (site.is_r(x, y) || site.is_b(x, y))
                g[i] = at(x + d.dx, y + d.dy) + 0.5f * (at(x, y) - at(x + 2 * d.dx, y + 2 * d.dy));
            else
                g[i] = v[i];
        }

    // red/blue via interpolated color differences against this green
    std::vector<float> dr(static_cast<size_t>(w) * h, 0.f), db(dr);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (site.is_r(x, y))
                dr[i] = v[i] - g[i];
            else if (site.is_b(x, y))
                db[i] = v[i] - g[i];
        }
    fill_difference(dr, w, h, site.rx, site.ry);
    fill_difference(db, w, h, site.bx, site.by);

    float* r = out.plane(0);
    float* b = out.plane(2);
    for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i) {
        r[i] = g[i] + dr[i];
        b[i] = g[i] + db[i];
    }
    return out;
}

RgbFrame demosaic(const CfaFrame& cfa)
{
    constexpr Direction kDirs[4] = {Direction::North, Direction::South, Direction::East, Direction::West};
    constexpr float kEps = 1e-4f;
    constexpr int kWindow = 5;

    const int w = cfa.img.width(), h = cfa.img.height();
    std::array<RgbFrame, 4> est;
    for (int k = 0; k < 4; ++k)
        est[k] = hamilton_adams_directional(cfa, kDirs[k]);

    RgbFrame out(w, h, 3);
    std::vector<float> wsum(static_cast<size_t>(w) * h, 0.f);
    std::vector<float> weight(static_cast<size_t>(w) * h, 0.f);

    for (int k = 0; k < 4; ++k) {
        const Dir d = dir_vector(kDirs[k]);
        const float* r = est[k].plane(0);
        const float* g = est[k].plane(1);
        const float* b = est[k].plane(2);
        auto cr = [&](int x, int y) {
            const size_t i = static_cast<size_t>(refl(y, h)) * w + refl(x, w);
            return r[i] - g[i];
        };
        auto cb = [&](int x, int y) {
            const size_t i = static_cast<size_t>(refl(y, h)) * w + refl(x, w);
            return b[i] - g[i];
        };

        // chromatic variation over a 5-pixel window extending along d
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float s = 0.f;
                for (int t = 1; t < kWindow; ++t) {
                    const int ax = x + t * d.dx, ay = y + t * d.dy;
                    const int px = x + (t - 1) * d.dx, py = y + (t - 1) * d.dy;
                    s += std::fabs(cr(ax, ay) - cr(px, py)) + std::fabs(cb(ax, ay) - cb(px, py));
                }
                const float denom = kEps + s;
                weight[static_cast<size_t>(y) * w + x] = 1.f / (denom * denom);
            }

        for (int c = 0; c < 3; ++c) {
            const float* src = est[k].plane(c);
            float* dst = out.plane(c);
            for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i)
                dst[i] += weight[i] * src[i];
        }
        for (size_t i = 0; i < wsum.size(); ++i)
            wsum[i] += weight[i];
    }

    for (int c = 0; c < 3; ++c) {
        float* dst = out.plane(c);
        for (size_t i = 0; i < wsum.size(); ++i)
            dst[i] /= wsum[i];
    }
    return out;
}

} // namespace rawden
