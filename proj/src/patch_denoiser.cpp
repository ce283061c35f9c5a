#include "rawden/patch_denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "rawden/parallel.hpp"

namespace rawden {

namespace {

bool patch_occluded(const Mask& mask, int x0, int y0, int r)
{
    if (mask.empty())
        return false;
    for (int y = y0; y < y0 + r; ++y)
        for (int x = x0; x < x0 + r; ++x)
            if (mask.at(x, y))
                return true;
    return false;
}

double patch_pair_distance(const Image& a, int ax, int ay, const Image& b, int bx, int by, int r)
{
    double acc = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        const float* pa = a.plane(c);
        const float* pb = b.plane(c);
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                const double d = pa[static_cast<size_t>(ay + y) * a.width() + ax + x] -
                                 pb[static_cast<size_t>(by + y) * b.width() + bx + x];
                acc += d * d;
            }
    }
    return acc;
}

void append_patch(PatchStack& stack, const Image& img, int frame, int x0, int y0)
{
    const int r = stack.r;
    const size_t base = stack.data.size();
    stack.data.resize(base + static_cast<size_t>(stack.channels) * r * r);
    float* dst = stack.data.data() + base;
    for (int c = 0; c < stack.channels; ++c) {
        const float* src = img.plane(c);
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x)
                dst[(static_cast<size_t>(c) * r + y) * r + x] =
                    src[static_cast<size_t>(y0 + y) * img.width() + x0 + x];
    }
    stack.provenance.push_back({frame, x0, y0});
}

struct Candidate {
    float dist;
    int spatial; // |dx| + |dy| tie-break
    int index;   // raster order tie-break
    int x, y;
};

std::vector<double> kaiser_window_1d(int r, double beta)
{
    std::vector<double> k(static_cast<size_t>(r));
    const double denom = std::cyl_bessel_i(0.0, beta);
    for (int i = 0; i < r; ++i) {
        const double t = 2.0 * i / (r - 1.0) - 1.0;
        k[static_cast<size_t>(i)] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - t * t))) / denom;
    }
    return k;
}

std::vector<int> patch_origins(int extent, int r, int stride)
{
    std::vector<int> xs;
    if (extent < r)
        throw DimensionError("patch grid: frame smaller than patch size");
    for (int x = 0; x + r <= extent; x += stride)
        xs.push_back(x);
    if (xs.back() != extent - r)
        xs.push_back(extent - r);
    return xs;
}

} // namespace

PatchStack match_volumes(const std::vector<Image>& warped, int ref,
                         const std::vector<Mask>& masks,
                         int x0, int y0, const DenoiseParams& params)
{
    const Image& ref_img = warped[static_cast<size_t>(ref)];
    const int w = ref_img.width(), h = ref_img.height(), r = params.r;
    const int n_frames = static_cast<int>(warped.size());
    if (x0 < 0 || y0 < 0 || x0 + r > w || y0 + r > h)
        throw DimensionError("match_volumes: reference patch outside frame bounds");

    PatchStack stack;
    stack.r = r;
    stack.channels = ref_img.channels();

    // validity of the reference volume's members
    std::vector<uint8_t> ref_valid(static_cast<size_t>(n_frames));
    int n_ref_valid = 0;
    for (int f = 0; f < n_frames; ++f) {
        const bool valid = (f == ref) || !patch_occluded(masks[static_cast<size_t>(f)], x0, y0, r);
        ref_valid[static_cast<size_t>(f)] = valid ? 1 : 0;
        n_ref_valid += valid ? 1 : 0;
    }
    const bool spatial_only = n_ref_valid == 0;

    std::vector<Candidate> candidates;
    int raster = 0;
    for (int dy = -params.search_radius; dy <= params.search_radius; dy += params.cand_stride)
        for (int dx = -params.search_radius; dx <= params.search_radius; dx += params.cand_stride) {
            const int cx = x0 + dx, cy = y0 + dy;
            ++raster;
            if (cx < 0 || cy < 0 || cx + r > w || cy + r > h)
                continue;

            if (spatial_only) {
                const double d = patch_pair_distance(ref_img, x0, y0, ref_img, cx, cy, r);
                candidates.push_back({static_cast<float>(d), std::abs(dx) + std::abs(dy), raster, cx, cy});
                continue;
            }

            double acc = 0.0;
            int pairs = 0;
            for (int f = 0; f < n_frames; ++f) {
                if (!ref_valid[static_cast<size_t>(f)])
                    continue;
                if (f != ref && patch_occluded(masks[static_cast<size_t>(f)], cx, cy, r))
                    continue;
                acc += patch_pair_distance(warped[static_cast<size_t>(f)], x0, y0,
                                           warped[static_cast<size_t>(f)], cx, cy, r);
                ++pairs;
            }
            if (pairs == 0)
                continue;
            candidates.push_back({static_cast<float>(acc / pairs), std::abs(dx) + std::abs(dy), raster, cx, cy});
        }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.spatial != b.spatial) return a.spatial < b.spatial;
        return a.index < b.index;
    });
    if (static_cast<int>(candidates.size()) > params.k_volumes)
        candidates.resize(static_cast<size_t>(params.k_volumes));

    // slice volumes in frame order until M patches are collected
    for (const Candidate& cand : candidates) {
        for (int f = 0; f < n_frames && stack.count() < params.m_patches; ++f) {
            if (spatial_only) {
                if (f != ref)
                    continue;
            } else if (f != ref && patch_occluded(masks[static_cast<size_t>(f)], cand.x, cand.y, r)) {
                continue;
            }
            append_patch(stack, warped[static_cast<size_t>(f)], f, cand.x, cand.y);
        }
        if (stack.count() >= params.m_patches)
            break;
    }
    return stack;
}

std::vector<int> pca_hard_threshold(PatchStack& stack, std::span<const double> tau)
{
    const int m = stack.count();
    const int r2 = stack.r * stack.r;
    const int channels = stack.channels;
    if (static_cast<int>(tau.size()) != channels || static_cast<int>(stack.sigma_hat_sq.size()) != channels)
        throw DimensionError("pca_hard_threshold: tau/sigma size must match channels");

    std::vector<int> retained(static_cast<size_t>(channels), r2);
    if (m < 2)
        return retained;

    for (int c = 0; c < channels; ++c) {
        const double thr = tau[static_cast<size_t>(c)] * tau[static_cast<size_t>(c)] *
                           stack.sigma_hat_sq[static_cast<size_t>(c)];
        // zero threshold keeps every component: reconstruction is exact
        if (thr <= 0.0)
            continue;

        // float is plenty here: thresholds sit orders of magnitude above the
        // covariance rounding error, and the hot loop is 2-3x faster
        Eigen::MatrixXf x(m, r2);
        for (int i = 0; i < m; ++i) {
            const float* p = stack.patch(i, c);
            for (int j = 0; j < r2; ++j)
                x(i, j) = p[j];
        }
        const Eigen::RowVectorXf mean = x.colwise().mean();
        x.rowwise() -= mean;

        const Eigen::MatrixXf cov = (x.transpose() * x) / static_cast<float>(m - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXf> eig(cov);

        int kept = 0;
        for (int j = 0; j < r2; ++j)
            if (eig.eigenvalues()(j) >= thr)
                ++kept;
        retained[static_cast<size_t>(c)] = kept;
        if (kept == r2)
            continue;

        if (kept == 0) {
            for (int i = 0; i < m; ++i) {
                float* p = stack.patch(i, c);
                for (int j = 0; j < r2; ++j)
                    p[j] = mean(j);
            }
            continue;
        }

        // eigenvalues ascend; the retained basis is the trailing block
        const Eigen::MatrixXf basis = eig.eigenvectors().rightCols(kept);
        const Eigen::MatrixXf coeff = x * basis;
        const Eigen::MatrixXf rec = coeff * basis.transpose();
        for (int i = 0; i < m; ++i) {
            float* p = stack.patch(i, c);
            for (int j = 0; j < r2; ++j)
                p[j] = rec(i, j) + mean(j);
        }
    }
    return retained;
}

Image aggregate(std::span<const PatchStack> stacks, std::span<const std::vector<int>> retained,
                int ref, int width, int height, int channels, double kaiser_beta,
                const Image& fallback, int* uncovered)
{
    Image num(width, height, channels);
    Image den(width, height, channels);

    for (size_t s = 0; s < stacks.size(); ++s) {
        const PatchStack& stack = stacks[s];
        const std::vector<double> kais = kaiser_window_1d(stack.r, kaiser_beta);
        for (int i = 0; i < stack.count(); ++i) {
            const PatchStack::Origin& org = stack.provenance[static_cast<size_t>(i)];
            if (org.frame != ref)
                continue;
            for (int c = 0; c < channels; ++c) {
                const double omega = 1.0 / (1.0 + retained[s][static_cast<size_t>(c)]);
                const float* p = stack.patch(i, c);
                float* np = num.plane(c);
                float* dp = den.plane(c);
                for (int y = 0; y < stack.r; ++y)
                    for (int x = 0; x < stack.r; ++x) {
                        const float kw = static_cast<float>(kais[static_cast<size_t>(y)] *
                                                            kais[static_cast<size_t>(x)] * omega);
                        const size_t idx = static_cast<size_t>(org.y + y) * width + org.x + x;
                        np[idx] += kw * p[static_cast<size_t>(y) * stack.r + x];
                        dp[idx] += kw;
                    }
            }
        }
    }

    Image out(width, height, channels);
    int missing = 0;
    for (int c = 0; c < channels; ++c) {
        const float* np = num.plane(c);
        const float* dp = den.plane(c);
        const float* fb = fallback.plane(c);
        float* op = out.plane(c);
        for (size_t i = 0; i < out.plane_size(); ++i) {
            if (dp[i] > 0.f) {
                op[i] = np[i] / dp[i];
            } else {
                op[i] = fb[i];
                if (c == 0)
                    ++missing;
            }
        }
    }
    if (uncovered)
        *uncovered = missing;
    return out;
}

Image denoise_frame(const std::vector<Image>& window, int ref,
                    const std::vector<FlowField>& flows, const std::vector<Mask>& masks,
                    const TransformedNoise& noise, std::span<const double> tau,
                    const DenoiseParams& params, int workers)
{
    const Image& ref_input = window[static_cast<size_t>(ref)];
    const int w = ref_input.width(), h = ref_input.height(), channels = ref_input.channels();
    const int r = params.r;

    std::vector<Image> warped(window.size());
    for (size_t i = 0; i < window.size(); ++i) {
        if (static_cast<int>(i) == ref || flows[i].empty())
            warped[i] = window[i];
        else
            warped[i] = warp(window[i], flows[i]);
    }

    const std::vector<int> xs = patch_origins(w, r, params.stride);
    const std::vector<int> ys = patch_origins(h, r, params.stride);
    const std::vector<double> kais = kaiser_window_1d(r, params.kaiser_beta);

    // per-chunk accumulation bands reduced in fixed order afterwards
    struct Band {
        int y_lo = 0, y_hi = 0;
        std::vector<float> num, den; // [channel][band rows * w]
    };
    std::vector<Band> bands(ys.size());

    parallel_chunks(static_cast<int>(ys.size()), workers, [&](int row) {
        const int y0 = ys[static_cast<size_t>(row)];
        Band& band = bands[static_cast<size_t>(row)];
        band.y_lo = std::max(0, y0 - params.search_radius);
        band.y_hi = std::min(h, y0 + params.search_radius + r);
        const size_t band_plane = static_cast<size_t>(band.y_hi - band.y_lo) * w;
        band.num.assign(band_plane * channels, 0.f);
        band.den.assign(band_plane * channels, 0.f);

        for (const int x0 : xs) {
            PatchStack stack = match_volumes(warped, ref, masks, x0, y0, params);
            stack.sigma_hat_sq = noise.sigma_hat_sq(x0, y0, r);
            const std::vector<int> m = pca_hard_threshold(stack, tau);

            for (int i = 0; i < stack.count(); ++i) {
                const PatchStack::Origin& org = stack.provenance[static_cast<size_t>(i)];
                if (org.frame != ref)
                    continue;
                for (int c = 0; c < channels; ++c) {
                    const float omega = static_cast<float>(1.0 / (1.0 + m[static_cast<size_t>(c)]));
                    const float* p = stack.patch(i, c);
                    float* np = band.num.data() + static_cast<size_t>(c) * band_plane;
                    float* dp = band.den.data() + static_cast<size_t>(c) * band_plane;
                    for (int y = 0; y < r; ++y) {
                        const size_t rowbase = static_cast<size_t>(org.y + y - band.y_lo) * w + org.x;
                        for (int x = 0; x < r; ++x) {
                            const float kw = static_cast<float>(kais[static_cast<size_t>(y)] *
                                                                kais[static_cast<size_t>(x)]) * omega;
                            np[rowbase + x] += kw * p[static_cast<size_t>(y) * r + x];
                            dp[rowbase + x] += kw;
                        }
                    }
                }
            }
        }
    });

    Image num(w, h, channels), den(w, h, channels);
    for (const Band& band : bands) {
        const size_t band_plane = static_cast<size_t>(band.y_hi - band.y_lo) * w;
        for (int c = 0; c < channels; ++c) {
            float* np = num.plane(c);
            float* dp = den.plane(c);
            const float* bn = band.num.data() + static_cast<size_t>(c) * band_plane;
            const float* bd = band.den.data() + static_cast<size_t>(c) * band_plane;
            for (size_t i = 0; i < band_plane; ++i) {
                np[static_cast<size_t>(band.y_lo) * w + i] += bn[i];
                dp[static_cast<size_t>(band.y_lo) * w + i] += bd[i];
            }
        }
    }

    Image out(w, h, channels);
    for (int c = 0; c < channels; ++c) {
        const float* np = num.plane(c);
        const float* dp = den.plane(c);
        const float* fb = ref_input.plane(c);
        float* op = out.plane(c);
        for (size_t i = 0; i < out.plane_size(); ++i)
            op[i] = dp[i] > 0.f ? np[i] / dp[i] : fb[i];
    }
    return out;
}

namespace {

// separable [1,4,6,4,1]/16 with whole-sample reflection
void binomial_filter(const Image& in, Image& out)
{
    const int w = in.width(), h = in.height();
    static const float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    auto refl = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * n - 2 - i;
        }
        return i;
    };

    out = Image(w, h, in.channels());
    std::vector<float> tmp(static_cast<size_t>(w) * h);
    for (int c = 0; c < in.channels(); ++c) {
        const float* src = in.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float acc = 0;
                for (int t = -2; t <= 2; ++t)
                    acc += k[t + 2] * src[static_cast<size_t>(y) * w + refl(x + t, w)];
                tmp[static_cast<size_t>(y) * w + x] = acc;
            }
        float* dst = out.plane(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float acc = 0;
                for (int t = -2; t <= 2; ++t)
                    acc += k[t + 2] * tmp[static_cast<size_t>(refl(y + t, h)) * w + x];
                dst[static_cast<size_t>(y) * w + x] = acc;
            }
    }
}

} // namespace

Image pyramid_down(const Image& img)
{
    Image smooth;
    binomial_filter(img, smooth);
    const int ow = (img.width() + 1) / 2;
    const int oh = (img.height() + 1) / 2;
    Image out(ow, oh, img.channels());
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out.at(x, y, c) = smooth.at(2 * x, 2 * y, c);
    return out;
}

Image pyramid_up(const Image& img, int target_w, int target_h)
{
    Image out(target_w, target_h, img.channels());
    const float sx = static_cast<float>(img.width()) / static_cast<float>(target_w);
    const float sy = static_cast<float>(img.height()) / static_cast<float>(target_h);
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < target_h; ++y)
            for (int x = 0; x < target_w; ++x) {
                const float fx = x * sx;
                const float fy = y * sy;
                const int x0 = std::min(static_cast<int>(fx), img.width() - 1);
                const int y0 = std::min(static_cast<int>(fy), img.height() - 1);
                const int x1 = std::min(x0 + 1, img.width() - 1);
                const int y1 = std::min(y0 + 1, img.height() - 1);
                const float ax = fx - static_cast<float>(x0);
                const float ay = fy - static_cast<float>(y0);
                const float v0 = img.at(x0, y0, c) * (1 - ax) + img.at(x1, y0, c) * ax;
                const float v1 = img.at(x0, y1, c) * (1 - ax) + img.at(x1, y1, c) * ax;
                out.at(x, y, c) = v0 * (1 - ay) + v1 * ay;
            }
    return out;
}

double pyramid_sigma_gain()
{
    // sqrt(sum h^2) per dimension, two dimensions compounded
    const double s1 = (1.0 + 16.0 + 36.0 + 16.0 + 1.0) / 256.0;
    return s1;
}

namespace {

FlowField downsample_flow(const FlowField& flow, int ow, int oh)
{
    FlowField out(ow, oh);
    const float sx = static_cast<float>(flow.width) / static_cast<float>(ow);
    const float sy = static_cast<float>(flow.height) / static_cast<float>(oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const int fx = std::min(static_cast<int>(x * sx), flow.width - 1);
            const int fy = std::min(static_cast<int>(y * sy), flow.height - 1);
            const size_t src = static_cast<size_t>(fy) * flow.width + fx;
            const size_t dst = static_cast<size_t>(y) * ow + x;
            out.u[dst] = flow.u[src] / sx;
            out.v[dst] = flow.v[src] / sy;
        }
    return out;
}

Mask downsample_mask(const Mask& mask, int ow, int oh)
{
    if (mask.empty())
        return Mask();
    Mask out(ow, oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            bool occ = false;
            for (int dy = 0; dy < 2 && !occ; ++dy)
                for (int dx = 0; dx < 2 && !occ; ++dx) {
                    const int fx = std::min(2 * x + dx, mask.width - 1);
                    const int fy = std::min(2 * y + dy, mask.height - 1);
                    occ = mask.at(fx, fy);
                }
            out.set(x, y, occ);
        }
    return out;
}

} // namespace

Image multiscale_denoise(const std::vector<Image>& window, int ref,
                         const std::vector<FlowField>& flows, const std::vector<Mask>& masks,
                         const TransformedNoise& noise, const MultiscaleParams& ms,
                         const DenoiseParams& params, int workers)
{
    const Image& ref_img = window[static_cast<size_t>(ref)];
    int scales = ms.scales;
    const int min_dim = std::min(ref_img.width(), ref_img.height());
    while (scales > 1 && (min_dim >> (scales - 1)) < 32) {
        --scales;
        std::fprintf(stderr, "multiscale_denoise: frame too small, reducing to %d scale(s)\n", scales);
    }
    if (static_cast<int>(ms.tau.size()) < scales)
        throw ConfigError("multiscale_denoise: need a tau row per scale");

    if (scales == 1)
        return denoise_frame(window, ref, flows, masks, noise, ms.tau[0], params, workers);

    const int n_frames = static_cast<int>(window.size());

    // pyramids per frame (level 0 = finest), plus the raw reference
    std::vector<std::vector<Image>> pyr(static_cast<size_t>(n_frames));
    for (int f = 0; f < n_frames; ++f) {
        pyr[static_cast<size_t>(f)].push_back(window[static_cast<size_t>(f)]);
        for (int s = 1; s < scales; ++s)
            pyr[static_cast<size_t>(f)].push_back(pyramid_down(pyr[static_cast<size_t>(f)].back()));
    }
    std::vector<Image> raw_pyr{*noise.raw_ref};
    for (int s = 1; s < scales; ++s)
        raw_pyr.push_back(pyramid_down(raw_pyr.back()));

    std::vector<std::vector<FlowField>> flows_s(static_cast<size_t>(scales));
    std::vector<std::vector<Mask>> masks_s(static_cast<size_t>(scales));
    flows_s[0] = flows;
    masks_s[0] = masks;
    for (int s = 1; s < scales; ++s) {
        const int lw = pyr[0][static_cast<size_t>(s)].width();
        const int lh = pyr[0][static_cast<size_t>(s)].height();
        for (int f = 0; f < n_frames; ++f) {
            flows_s[static_cast<size_t>(s)].push_back(
                flows_s[static_cast<size_t>(s - 1)][static_cast<size_t>(f)].empty()
                    ? FlowField()
                    : downsample_flow(flows_s[static_cast<size_t>(s - 1)][static_cast<size_t>(f)], lw, lh));
            masks_s[static_cast<size_t>(s)].push_back(
                downsample_mask(masks_s[static_cast<size_t>(s - 1)][static_cast<size_t>(f)], lw, lh));
        }
    }

    const double gain = pyramid_sigma_gain();
    Image current;
    for (int s = scales - 1; s >= 0; --s) {
        std::vector<Image> level_window;
        level_window.reserve(static_cast<size_t>(n_frames));
        for (int f = 0; f < n_frames; ++f)
            level_window.push_back(pyr[static_cast<size_t>(f)][static_cast<size_t>(s)]);

        // replace the low band of the noisy level with the denoised coarser result
        if (s < scales - 1) {
            Image& ref_level = level_window[static_cast<size_t>(ref)];
            const Image& coarse_noisy = pyr[static_cast<size_t>(ref)][static_cast<size_t>(s + 1)];
            const Image up_noisy = pyramid_up(coarse_noisy, ref_level.width(), ref_level.height());
            const Image up_denoised = pyramid_up(current, ref_level.width(), ref_level.height());
            Image merged(ref_level.width(), ref_level.height(), ref_level.channels());
            for (size_t i = 0; i < merged.size(); ++i)
                merged.data()[i] = ref_level.data()[i] - up_noisy.data()[i] + up_denoised.data()[i];
            ref_level = std::move(merged);
        }

        TransformedNoise level_noise = noise;
        level_noise.raw_ref = &raw_pyr[static_cast<size_t>(s)];
        level_noise.model = noise.model.scaled_sigma(std::pow(gain, s));

        current = denoise_frame(level_window, ref, flows_s[static_cast<size_t>(s)],
                                masks_s[static_cast<size_t>(s)], level_noise, ms.tau[static_cast<size_t>(s)],
                                params, workers);
    }
    return current;
}

} // namespace rawden
