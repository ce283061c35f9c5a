#include "rawden/optical_flow.hpp"

#include <algorithm>
#include <cmath>

#include "rawden/frame_io.hpp"

namespace rawden {

namespace {

using Plane = std::vector<float>;

inline int clampi(int v, int lo, int hi)
{
    return v < lo ? lo : (v > hi ? hi : v);
}

// separable Gaussian with reflected boundaries
void gaussian_smooth(Plane& img, int w, int h, double sigma)
{
    if (sigma <= 0)
        return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel)
        k = static_cast<float>(k / sum);

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };

    Plane tmp(img.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * img[static_cast<size_t>(y) * w + reflect(x + k, w)];
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y) {
            float acc = 0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<size_t>(reflect(y + k, h)) * w + x];
            img[static_cast<size_t>(y) * w + x] = acc;
        }
}

inline float bilinear_at(const Plane& img, int w, int h, float x, float y)
{
    const int x0 = clampi(static_cast<int>(std::floor(x)), 0, w - 1);
    const int y0 = clampi(static_cast<int>(std::floor(y)), 0, h - 1);
    const int x1 = clampi(x0 + 1, 0, w - 1);
    const int y1 = clampi(y0 + 1, 0, h - 1);
    const float fx = std::clamp(x - static_cast<float>(x0), 0.f, 1.f);
    const float fy = std::clamp(y - static_cast<float>(y0), 0.f, 1.f);
    const float a = img[static_cast<size_t>(y0) * w + x0];
    const float b = img[static_cast<size_t>(y0) * w + x1];
    const float c = img[static_cast<size_t>(y1) * w + x0];
    const float d = img[static_cast<size_t>(y1) * w + x1];
    return a + fx * (b - a) + fy * (c - a) + fx * fy * (a - b - c + d);
}

// Catmull-Rom cubic; coordinates clamp at the borders
inline float cubic(float p0, float p1, float p2, float p3, float t)
{
    return p1 + 0.5f * t * (p2 - p0 + t * (2.f * p0 - 5.f * p1 + 4.f * p2 - p3 + t * (3.f * (p1 - p2) + p3 - p0)));
}

inline float bicubic_at(const Plane& img, int w, int h, float x, float y)
{
    const int ix = static_cast<int>(std::floor(x));
    const int iy = static_cast<int>(std::floor(y));
    const float fx = x - static_cast<float>(ix);
    const float fy = y - static_cast<float>(iy);
    float col[4];
    for (int dy = -1; dy <= 2; ++dy) {
        const int yy = clampi(iy + dy, 0, h - 1);
        const float* row = img.data() + static_cast<size_t>(yy) * w;
        const float p0 = row[clampi(ix - 1, 0, w - 1)];
        const float p1 = row[clampi(ix, 0, w - 1)];
        const float p2 = row[clampi(ix + 1, 0, w - 1)];
        const float p3 = row[clampi(ix + 2, 0, w - 1)];
        col[dy + 1] = cubic(p0, p1, p2, p3, fx);
    }
    return cubic(col[0], col[1], col[2], col[3], fy);
}

// downscale by `zoom` after Gaussian presmoothing
Plane zoom_out(const Plane& in, int w, int h, double zoom, int& ow, int& oh)
{
    ow = std::max(1, static_cast<int>(std::lround(w * zoom)));
    oh = std::max(1, static_cast<int>(std::lround(h * zoom)));
    Plane smoothed = in;
    const double sigma = 0.6 * std::sqrt(1.0 / (zoom * zoom) - 1.0);
    gaussian_smooth(smoothed, w, h, sigma);
    Plane out(static_cast<size_t>(ow) * oh);
    const float sx = static_cast<float>(w) / static_cast<float>(ow);
    const float sy = static_cast<float>(h) / static_cast<float>(oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[static_cast<size_t>(y) * ow + x] = bilinear_at(smoothed, w, h, x * sx, y * sy);
    return out;
}

// bilinear resize of a flow component to a larger grid
Plane zoom_in(const Plane& in, int w, int h, int ow, int oh)
{
    Plane out(static_cast<size_t>(ow) * oh);
    const float sx = static_cast<float>(w) / static_cast<float>(ow);
    const float sy = static_cast<float>(h) / static_cast<float>(oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[static_cast<size_t>(y) * ow + x] = bilinear_at(in, w, h, x * sx, y * sy);
    return out;
}

void centered_gradient(const Plane& img, int w, int h, Plane& gx, Plane& gy)
{
    gx.assign(img.size(), 0.f);
    gy.assign(img.size(), 0.f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const int xm = clampi(x - 1, 0, w - 1), xp = clampi(x + 1, 0, w - 1);
            const int ym = clampi(y - 1, 0, h - 1), yp = clampi(y + 1, 0, h - 1);
            gx[i] = 0.5f * (img[static_cast<size_t>(y) * w + xp] - img[static_cast<size_t>(y) * w + xm]);
            gy[i] = 0.5f * (img[static_cast<size_t>(yp) * w + x] - img[static_cast<size_t>(ym) * w + x]);
        }
}

// one pyramid level of the primal-dual scheme
void tvl1_level(const Plane& i0, const Plane& i1, int w, int h, Plane& u1, Plane& u2, const FlowParams& prm)
{
    const size_t n = static_cast<size_t>(w) * h;
    const float l_t = static_cast<float>(prm.lambda * prm.theta);
    const float taut = static_cast<float>(prm.time_step / prm.theta);
    const float theta = static_cast<float>(prm.theta);

    Plane i1x, i1y;
    centered_gradient(i1, w, h, i1x, i1y);

    Plane i1w(n), i1wx(n), i1wy(n), grad(n), rho_c(n);
    Plane v1(n), v2(n), div_p1(n), div_p2(n);
    Plane p11(n, 0.f), p12(n, 0.f), p21(n, 0.f), p22(n, 0.f);

    for (int warp = 0; warp < prm.warps; ++warp) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                const float xx = static_cast<float>(x) + u1[i];
                const float yy = static_cast<float>(y) + u2[i];
                i1w[i] = bicubic_at(i1, w, h, xx, yy);
                i1wx[i] = bicubic_at(i1x, w, h, xx, yy);
                i1wy[i] = bicubic_at(i1y, w, h, xx, yy);
                grad[i] = i1wx[i] * i1wx[i] + i1wy[i] * i1wy[i];
                rho_c[i] = i1w[i] - i1wx[i] * u1[i] - i1wy[i] * u2[i] - i0[i];
            }

        for (int it = 0; it < prm.iterations; ++it) {
            // data term threshold
            for (size_t i = 0; i < n; ++i) {
                const float rho = rho_c[i] + i1wx[i] * u1[i] + i1wy[i] * u2[i];
                float d1 = 0.f, d2 = 0.f;
                if (rho < -l_t * grad[i]) {
                    d1 = l_t * i1wx[i];
                    d2 = l_t * i1wy[i];
                } else if (rho > l_t * grad[i]) {
                    d1 = -l_t * i1wx[i];
                    d2 = -l_t * i1wy[i];
                } else if (grad[i] > 1e-10f) {
                    d1 = -rho * i1wx[i] / grad[i];
                    d2 = -rho * i1wy[i] / grad[i];
                }
                v1[i] = u1[i] + d1;
                v2[i] = u2[i] + d2;
            }

            // divergence of the dual variables (backward differences)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const size_t i = static_cast<size_t>(y) * w + x;
                    float dp1 = p11[i], dp2 = p21[i];
                    if (x > 0) { dp1 -= p11[i - 1]; dp2 -= p21[i - 1]; }
                    float dq1 = p12[i], dq2 = p22[i];
                    if (y > 0) { dq1 -= p12[i - w]; dq2 -= p22[i - w]; }
                    div_p1[i] = dp1 + dq1;
                    div_p2[i] = dp2 + dq2;
                }

            for (size_t i = 0; i < n; ++i) {
                u1[i] = v1[i] + theta * div_p1[i];
                u2[i] = v2[i] + theta * div_p2[i];
            }

            // dual ascent on the flow gradients (forward differences)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const size_t i = static_cast<size_t>(y) * w + x;
                    const float u1x = (x < w - 1) ? u1[i + 1] - u1[i] : 0.f;
                    const float u1y = (y < h - 1) ? u1[i + w] - u1[i] : 0.f;
                    const float u2x = (x < w - 1) ? u2[i + 1] - u2[i] : 0.f;
                    const float u2y = (y < h - 1) ? u2[i + w] - u2[i] : 0.f;
                    const float ng1 = 1.f + taut * std::sqrt(u1x * u1x + u1y * u1y);
                    const float ng2 = 1.f + taut * std::sqrt(u2x * u2x + u2y * u2y);
                    p11[i] = (p11[i] + taut * u1x) / ng1;
                    p12[i] = (p12[i] + taut * u1y) / ng1;
                    p21[i] = (p21[i] + taut * u2x) / ng2;
                    p22[i] = (p22[i] + taut * u2y) / ng2;
                }
        }
    }
}

} // namespace

FlowField tvl1_flow(const Image& src, const Image& dst, const FlowParams& prm)
{
    if (src.channels() != 1 || dst.channels() != 1)
        throw DimensionError("tvl1_flow: inputs must be single-channel luma planes");
    if (!src.same_shape(dst))
        throw DimensionError("tvl1_flow: frame sizes differ");
    const int w = src.width(), h = src.height();
    if (std::min(w, h) < prm.min_size)
        throw DimensionError("tvl1_flow: frame smaller than the coarsest pyramid level (" +
                             std::to_string(prm.min_size) + " px)");

    // joint normalization to [0,255] makes lambda independent of input scale
    float lo = src.data()[0], hi = src.data()[0];
    for (size_t i = 0; i < src.plane_size(); ++i) {
        lo = std::min({lo, src.data()[i], dst.data()[i]});
        hi = std::max({hi, src.data()[i], dst.data()[i]});
    }
    const float scale = (hi - lo) > 1e-12f ? 255.f / (hi - lo) : 0.f;

    Plane i0(src.plane_size()), i1(src.plane_size());
    for (size_t i = 0; i < i0.size(); ++i) {
        i0[i] = (src.data()[i] - lo) * scale;
        i1[i] = (dst.data()[i] - lo) * scale;
    }
    gaussian_smooth(i0, w, h, prm.presmooth_sigma);
    gaussian_smooth(i1, w, h, prm.presmooth_sigma);

    // pyramid, finest first
    std::vector<Plane> pyr0{std::move(i0)}, pyr1{std::move(i1)};
    std::vector<int> pw{w}, ph{h};
    while (true) {
        const int cw = pw.back(), ch = ph.back();
        if (std::lround(std::min(cw, ch) * prm.zoom) < prm.min_size)
            break;
        int nw = 0, nh = 0;
        pyr0.push_back(zoom_out(pyr0.back(), cw, ch, prm.zoom, nw, nh));
        pyr1.push_back(zoom_out(pyr1.back(), cw, ch, prm.zoom, nw, nh));
        pw.push_back(nw);
        ph.push_back(nh);
    }

    const int levels = static_cast<int>(pyr0.size());
    Plane u1(static_cast<size_t>(pw.back()) * ph.back(), 0.f);
    Plane u2(u1.size(), 0.f);

    for (int l = levels - 1; l >= 0; --l) {
        tvl1_level(pyr0[l], pyr1[l], pw[l], ph[l], u1, u2, prm);
        if (l > 0) {
            u1 = zoom_in(u1, pw[l], ph[l], pw[l - 1], ph[l - 1]);
            u2 = zoom_in(u2, pw[l], ph[l], pw[l - 1], ph[l - 1]);
            const float s = static_cast<float>(1.0 / prm.zoom);
            for (size_t i = 0; i < u1.size(); ++i) {
                u1[i] *= s;
                u2[i] *= s;
            }
        }
    }

    FlowField out(w, h);
    out.u = std::move(u1);
    out.v = std::move(u2);
    return out;
}

Mask reciprocity_mask(const FlowField& fwd, const FlowField& bwd, double limit)
{
    if (fwd.width != bwd.width || fwd.height != bwd.height)
        throw DimensionError("reciprocity_mask: flow sizes differ");

    const int w = fwd.width, h = fwd.height;
    Mask mask(w, h);
    const float lim2 = static_cast<float>(limit * limit);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const float tx = static_cast<float>(x) + fwd.u[i];
            const float ty = static_cast<float>(y) + fwd.v[i];
            if (tx < 0.f || ty < 0.f || tx > static_cast<float>(w - 1) || ty > static_cast<float>(h - 1)) {
                mask.set(x, y, true);
                continue;
            }
            const float bu = bilinear_at(bwd.u, w, h, tx, ty);
            const float bv = bilinear_at(bwd.v, w, h, tx, ty);
            const float rx = fwd.u[i] + bu;
            const float ry = fwd.v[i] + bv;
            mask.set(x, y, rx * rx + ry * ry > lim2);
        }
    return mask;
}

void dump_flow(const std::string& path, const FlowField& flow, const Mask& mask)
{
    Image out(flow.width, flow.height, 3);
    std::copy(flow.u.begin(), flow.u.end(), out.plane(0));
    std::copy(flow.v.begin(), flow.v.end(), out.plane(1));
    if (!mask.empty())
        for (size_t i = 0; i < mask.occluded.size(); ++i)
            out.plane(2)[i] = mask.occluded[i] ? 1.f : 0.f;
    write_float_frame(path, out);
}

Image warp(const Image& frame, const FlowField& flow)
{
    if (frame.width() != flow.width || frame.height() != flow.height)
        throw DimensionError("warp: flow size does not match frame");

    Image out(frame.width(), frame.height(), frame.channels());
    const int w = frame.width(), h = frame.height();
    for (int c = 0; c < frame.channels(); ++c) {
        const float* src = frame.plane(c);
        Plane plane(src, src + frame.plane_size());
        float* dst = out.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                dst[i] = bilinear_at(plane, w, h, static_cast<float>(x) + flow.u[i],
                                     static_cast<float>(y) + flow.v[i]);
            }
    }
    return out;
}

} // namespace rawden
