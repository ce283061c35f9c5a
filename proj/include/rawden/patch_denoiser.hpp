#pragma once

#include <span>
#include <vector>

#include "rawden/image.hpp"
#include "rawden/optical_flow.hpp"
#include "rawden/stage_noise.hpp"

namespace rawden {

// Block of similar patches sliced from matched 3D volumes. Patch data is
// [patch][channel][r*r]; provenance records which warped frame and origin
// each row came from.
struct PatchStack {
    struct Origin {
        int frame, x, y;
    };

    int r = 0;
    int channels = 0;
    std::vector<float> data;
    std::vector<Origin> provenance;
    std::vector<double> sigma_hat_sq; // per channel

    int count() const { return static_cast<int>(provenance.size()); }
    float* patch(int i, int c) { return data.data() + (static_cast<size_t>(i) * channels + c) * r * r; }
    const float* patch(int i, int c) const { return data.data() + (static_cast<size_t>(i) * channels + c) * r * r; }
};

struct DenoiseParams {
    int r = 7;
    int stride = 3;            // reference patch stride for the full sweep
    int k_volumes = 66;        // K most similar volumes kept
    int m_patches = 98;        // patches sliced from the volumes (>= r^2)
    int search_radius = 18;    // 37x37 candidate window
    int cand_stride = 3;       // candidate enumeration stride
    double kaiser_beta = 2.0;
};

// Builds the patch stack for the reference patch at (x0, y0): scores
// candidate volumes by mean patchwise distance over non-occluded member
// pairs, keeps the K best (the reference volume always ranks first) and
// slices them in frame order until m_patches are collected.
PatchStack match_volumes(const std::vector<Image>& warped, int ref,
                         const std::vector<Mask>& masks,
                         int x0, int y0, const DenoiseParams& params);

// Channelwise PCA with eigenvalue hard threshold tau_c^2 * sigma_c^2
// (covariance divisor M-1). Denoises the stack in place and returns the
// number of retained components per channel.
std::vector<int> pca_hard_threshold(PatchStack& stack, std::span<const double> tau);

// Kaiser-weighted aggregation of the reference-frame patches of denoised
// stacks; per-stack weights are 1/(1+m_c). Pixels no stack covered are
// copied from `fallback` and counted in *uncovered.
Image aggregate(std::span<const PatchStack> stacks, std::span<const std::vector<int>> retained,
                int ref, int width, int height, int channels, double kaiser_beta,
                const Image& fallback, int* uncovered = nullptr);

// Full sweep at the configured stride: match, threshold, aggregate.
Image denoise_frame(const std::vector<Image>& window, int ref,
                    const std::vector<FlowField>& flows, const std::vector<Mask>& masks,
                    const TransformedNoise& noise, std::span<const double> tau,
                    const DenoiseParams& params, int workers = 1);

struct MultiscaleParams {
    int scales = 3;
    // thresholds per scale (0 = finest), per transformed channel
    std::vector<std::vector<double>> tau;
};

// Three-scale wrapper: binomial pyramid per frame, coarsest denoised first,
// then each finer level has its low band replaced by the upsampled coarser
// result before being denoised with its own thresholds. The noise curve at
// scale s is attenuated by the pyramid filter's white-noise gain.
Image multiscale_denoise(const std::vector<Image>& window, int ref,
                         const std::vector<FlowField>& flows, const std::vector<Mask>& masks,
                         const TransformedNoise& noise, const MultiscaleParams& ms,
                         const DenoiseParams& params, int workers = 1);

// pyramid primitives, shared with the tests
Image pyramid_down(const Image& img);
Image pyramid_up(const Image& img, int target_w, int target_h);

// sigma attenuation per pyramid level of the 5-tap binomial filter
double pyramid_sigma_gain();

} // namespace rawden
