#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "rawden/image.hpp"
#include "rawden/optical_flow.hpp"
#include "rawden/stage_noise.hpp"

namespace rawden {

// W same-size patches tracked across the temporal window, occlusion-replaced
// so the set always holds W members. Member data is [member][channel][r*r].
struct PatchTrajectory {
    int r = 0;
    int channels = 0;
    int ref_member = 0;               // index of the patch from the reference frame
    std::vector<float> data;          // W * channels * r^2
    std::vector<uint8_t> was_occluded;
    std::vector<double> weights;      // W * channels, filled by the filter step

    int members() const { return static_cast<int>(was_occluded.size()); }
    float* member(int i, int c) { return data.data() + (static_cast<size_t>(i) * channels + c) * r * r; }
    const float* member(int i, int c) const { return data.data() + (static_cast<size_t>(i) * channels + c) * r * r; }
};

struct PrefilterParams {
    int r = 7;
    int stride = 3;
    double h = 8.75;                 // 1.25 * r
    int occlusion_search_radius = 5; // spatial radius for replacing occluded members
    double sv_safety = 1.25;         // margin on the expected noise singular values
    int mc_trials = 1000;
    uint64_t mc_seed = 0x6d70746162ull;
    double variance_floor = 1e-6;    // absolute, applied in weight denominators
};

// Expected ordered singular values of the weighted pure-noise matrix
// W^(1/2) N, N having i.i.d. Normal(0, sigma^2) entries, estimated by Monte
// Carlo and cached per (rows, cols, weight multiset quantized to 1e-2).
// Tables are computed at unit variance; sigma scales the result linearly.
class MpTable {
public:
    explicit MpTable(int trials = 1000, uint64_t seed = 0x6d70746162ull) : trials_(trials), seed_(seed) {}

    std::vector<double> expected_singular_values(int n_rows, int n_cols,
                                                 std::span<const double> weights,
                                                 double sigma_hat_sq) const;

private:
    int trials_;
    uint64_t seed_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<uint64_t, std::vector<double>> cache_;
    // pairwise row inner products of the unit-variance draws, per geometry
    mutable std::unordered_map<uint64_t, std::shared_ptr<const std::vector<double>>> dot_cache_;
};

// Collects the trajectory of the r x r patch at `origin` from frames already
// warped to the reference. A member is occluded iff any of its pixels is
// masked; occluded members are replaced by the closest non-occluded patch in
// the spatio-temporal neighbourhood, or by the reference patch itself.
PatchTrajectory collect_trajectory(const std::vector<Image>& warped, int ref,
                                   const std::vector<Mask>& masks,
                                   int x0, int y0, int r, int search_radius);

// Weighted PCA of one W x n matrix of flattened patches.
struct WpcaResult {
    std::vector<double> b;                  // weighted mean row
    std::vector<double> eigenvalues;        // descending
    double v1 = 0.0;                        // sum of weights
    double v2 = 0.0;                        // sum of squared weights
    std::vector<uint8_t> retained;          // per component
    std::vector<double> reconstructed_ref;  // filtered reference row
    bool degenerate = false;                // one effective member: b returned
};

// Eigendecomposition of the weighted covariance via SVD of W^(1/2) X_centered
// with Lambda = V1/(V1^2-V2) * S^2; components with eigenvalue below their
// cutoff are zeroed before reconstructing the reference row.
WpcaResult wpca_core(std::span<const double> x, int n_rows, int n_cols,
                     std::span<const double> weights, int ref_row,
                     std::span<const double> delta);

// Weighted-PCA filter of one trajectory: per channel, similarity weights,
// weighted mean, eigendecomposition via SVD of W^(1/2) X_centered, hard
// threshold against the expected noise spectrum, and reconstruction of the
// reference row. Returns channels * r^2 values.
std::vector<float> wpca_filter(PatchTrajectory& traj, std::span<const double> sigma_hat_sq,
                               const PrefilterParams& params, const MpTable& table);

// Applies the trajectory filter over all overlapping patches of the
// reference frame and aggregates the results by uniform averaging. The
// MpTable caches noise spectra across frames and is safe to share.
Image prefilter_frame(const std::vector<Image>& window, int ref,
                      const std::vector<FlowField>& flows, const std::vector<Mask>& masks,
                      const TransformedNoise& noise, const PrefilterParams& params,
                      const MpTable& table, int workers = 1);

} // namespace rawden
