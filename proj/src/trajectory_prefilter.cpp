#include "rawden/trajectory_prefilter.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "rawden/parallel.hpp"
#include "rawden/rng.hpp"

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

void copy_patch(const Image& img, int x0, int y0, int r, float* dst)
{
    for (int c = 0; c < img.channels(); ++c) {
        const float* src = img.plane(c);
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x)
                dst[(static_cast<size_t>(c) * r + y) * r + x] =
                    src[static_cast<size_t>(y0 + y) * img.width() + x0 + x];
    }
}

double patch_distance_sq(const Image& img, int x0, int y0, const float* ref, int r, int channels)
{
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
        const float* src = img.plane(c);
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                const double d = src[static_cast<size_t>(y0 + y) * img.width() + x0 + x] -
                                 ref[(static_cast<size_t>(c) * r + y) * r + x];
                acc += d * d;
            }
    }
    return acc;
}

} // namespace

std::vector<double> MpTable::expected_singular_values(int n_rows, int n_cols,
                                                      std::span<const double> weights,
                                                      double sigma_hat_sq) const
{
    if (n_rows < 1 || n_rows > 16 || static_cast<int>(weights.size()) != n_rows)
        throw DimensionError("MpTable: bad row count or weight count");

    const double sigma = sigma_hat_sq > 0 ? std::sqrt(sigma_hat_sq) : 0.0;
    if (sigma == 0.0)
        return std::vector<double>(static_cast<size_t>(n_rows), 0.0);

    std::vector<int> qw(weights.size());
    for (size_t i = 0; i < weights.size(); ++i)
        qw[i] = static_cast<int>(std::lround(std::clamp(weights[i], 0.0, 1.0) * 100.0));
    std::sort(qw.begin(), qw.end());

    // weights fit 7 bits each after quantization
    uint64_t key = (static_cast<uint64_t>(n_rows) << 32) ^ static_cast<uint64_t>(n_cols);
    for (int v : qw)
        key = (key << 7) ^ static_cast<uint64_t>(v);

    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            std::vector<double> out = it->second;
            for (auto& v : out)
                v *= sigma;
            return out;
        }
    }

    // The singular values of W^(1/2)N depend on N only through the pairwise
    // inner products of its rows, so the unit-variance draws are shared by
    // every weight multiset of the same geometry and computed once.
    const uint64_t geom_key = (static_cast<uint64_t>(n_rows) << 32) ^ static_cast<uint64_t>(n_cols);
    std::shared_ptr<const std::vector<double>> dots;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = dot_cache_.find(geom_key);
        if (it != dot_cache_.end())
            dots = it->second;
    }
    if (!dots) {
        const uint64_t kh = rng::key3(seed_, static_cast<uint64_t>(n_rows), static_cast<uint64_t>(n_cols));
        auto fresh = std::make_shared<std::vector<double>>(
            static_cast<size_t>(trials_) * n_rows * n_rows, 0.0);
        Eigen::MatrixXd n(n_rows, n_cols);
        for (int t = 0; t < trials_; ++t) {
            for (int i = 0; i < n_rows; ++i)
                for (int j = 0; j < n_cols; ++j)
                    n(i, j) = rng::normal_at(kh, static_cast<uint64_t>(t),
                                             static_cast<uint64_t>(i) * n_cols + j);
            const Eigen::MatrixXd g = n * n.transpose();
            double* dst = fresh->data() + static_cast<size_t>(t) * n_rows * n_rows;
            for (int i = 0; i < n_rows; ++i)
                for (int j = 0; j < n_rows; ++j)
                    dst[static_cast<size_t>(i) * n_rows + j] = g(i, j);
        }
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = dot_cache_.emplace(geom_key, std::move(fresh));
        dots = it->second;
    }

    // per-multiset pass: scale the cached Gram rows/cols and average the
    // ordered singular values
    std::vector<double> mean(static_cast<size_t>(n_rows), 0.0);
    std::vector<double> sw(static_cast<size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i)
        sw[static_cast<size_t>(i)] = std::sqrt(qw[static_cast<size_t>(i)] / 100.0);
    Eigen::MatrixXd g(n_rows, n_rows);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    for (int t = 0; t < trials_; ++t) {
        const double* src = dots->data() + static_cast<size_t>(t) * n_rows * n_rows;
        for (int i = 0; i < n_rows; ++i)
            for (int j = 0; j < n_rows; ++j)
                g(i, j) = sw[static_cast<size_t>(i)] * sw[static_cast<size_t>(j)] *
                          src[static_cast<size_t>(i) * n_rows + j];
        eig.compute(g, Eigen::EigenvaluesOnly);
        for (int i = 0; i < n_rows; ++i) {
            const double ev = eig.eigenvalues()(n_rows - 1 - i);
            mean[static_cast<size_t>(i)] += ev > 0 ? std::sqrt(ev) : 0.0;
        }
    }
    for (auto& v : mean)
        v /= static_cast<double>(trials_);

    {
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(key, mean);
    }

    std::vector<double> out = mean;
    for (auto& v : out)
        v *= sigma;
    return out;
}

PatchTrajectory collect_trajectory(const std::vector<Image>& warped, int ref,
                                   const std::vector<Mask>& masks,
                                   int x0, int y0, int r, int search_radius)
{
    const int w_frames = static_cast<int>(warped.size());
    const Image& ref_img = warped[static_cast<size_t>(ref)];
    const int channels = ref_img.channels();
    if (x0 < 0 || y0 < 0 || x0 + r > ref_img.width() || y0 + r > ref_img.height())
        throw DimensionError("collect_trajectory: patch outside frame bounds");

    PatchTrajectory traj;
    traj.r = r;
    traj.channels = channels;
    traj.ref_member = ref;
    traj.data.resize(static_cast<size_t>(w_frames) * channels * r * r);
    traj.was_occluded.assign(static_cast<size_t>(w_frames), 0);

    std::vector<float> ref_patch(static_cast<size_t>(channels) * r * r);
    copy_patch(ref_img, x0, y0, r, ref_patch.data());

    for (int i = 0; i < w_frames; ++i) {
        const bool occ = (i != ref) && patch_occluded(masks[static_cast<size_t>(i)], x0, y0, r);
        traj.was_occluded[static_cast<size_t>(i)] = occ ? 1 : 0;
        if (!occ) {
            copy_patch(warped[static_cast<size_t>(i)], x0, y0, r, traj.member(i, 0));
            continue;
        }

        // best non-occluded patch in the spatio-temporal neighbourhood;
        // the reference patch position itself is excluded from the search
        double best = -1.0;
        int bj = -1, bx = 0, by = 0;
        for (int j = 0; j < w_frames; ++j) {
            const Image& img = warped[static_cast<size_t>(j)];
            for (int dy = -search_radius; dy <= search_radius; ++dy)
                for (int dx = -search_radius; dx <= search_radius; ++dx) {
                    if (j == ref && dx == 0 && dy == 0)
                        continue;
                    const int cx = x0 + dx, cy = y0 + dy;
                    if (cx < 0 || cy < 0 || cx + r > img.width() || cy + r > img.height())
                        continue;
                    if (patch_occluded(masks[static_cast<size_t>(j)], cx, cy, r))
                        continue;
                    const double d = patch_distance_sq(img, cx, cy, ref_patch.data(), r, channels);
                    if (best < 0 || d < best) {
                        best = d;
                        bj = j;
                        bx = cx;
                        by = cy;
                    }
                }
        }
        if (bj >= 0)
            copy_patch(warped[static_cast<size_t>(bj)], bx, by, r, traj.member(i, 0));
        else
            std::copy(ref_patch.begin(), ref_patch.end(), traj.member(i, 0));
    }
    return traj;
}

WpcaResult wpca_core(std::span<const double> x, int n_rows, int n_cols,
                     std::span<const double> weights, int ref_row,
                     std::span<const double> delta)
{
    if (static_cast<int>(x.size()) != n_rows * n_cols ||
        static_cast<int>(weights.size()) != n_rows || ref_row < 0 || ref_row >= n_rows)
        throw DimensionError("wpca_core: inconsistent dimensions");

    WpcaResult res;
    for (double w : weights) {
        res.v1 += w;
        res.v2 += w * w;
    }

    // weighted mean row
    res.b.assign(static_cast<size_t>(n_cols), 0.0);
    for (int i = 0; i < n_rows; ++i)
        for (int j = 0; j < n_cols; ++j)
            res.b[static_cast<size_t>(j)] += weights[static_cast<size_t>(i)] * x[static_cast<size_t>(i) * n_cols + j];
    for (auto& v : res.b)
        v /= res.v1;

    // one effective member: the PCA factor blows up, return the mean
    if (n_rows < 2 || res.v1 * res.v1 - res.v2 <= 1e-12 * res.v1 * res.v1) {
        res.degenerate = true;
        res.reconstructed_ref = res.b;
        res.eigenvalues.assign(static_cast<size_t>(n_rows), 0.0);
        res.retained.assign(static_cast<size_t>(n_rows), 0);
        return res;
    }

    const double fac = res.v1 / (res.v1 * res.v1 - res.v2);

    // SVD of W^(1/2) X_centered through the small Gram matrix
    Eigen::MatrixXd xc(n_rows, n_cols), a(n_rows, n_cols);
    for (int i = 0; i < n_rows; ++i) {
        const double sw = std::sqrt(weights[static_cast<size_t>(i)]);
        for (int j = 0; j < n_cols; ++j) {
            const double centered = x[static_cast<size_t>(i) * n_cols + j] - res.b[static_cast<size_t>(j)];
            xc(i, j) = centered;
            a(i, j) = sw * centered;
        }
    }
    const Eigen::MatrixXd gram = a * a.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);

    res.eigenvalues.resize(static_cast<size_t>(n_rows));
    res.retained.assign(static_cast<size_t>(n_rows), 0);
    const Eigen::VectorXd x_ref = xc.row(ref_row);
    Eigen::VectorXd rec = Eigen::Map<const Eigen::VectorXd>(res.b.data(), n_cols);
    const double s2_max = std::max(eig.eigenvalues()(n_rows - 1), 0.0);

    for (int k = 0; k < n_rows; ++k) {
        const double s2 = std::max(eig.eigenvalues()(n_rows - 1 - k), 0.0);
        const double lambda = fac * s2;
        res.eigenvalues[static_cast<size_t>(k)] = lambda;
        const double cutoff = k < static_cast<int>(delta.size()) ? delta[static_cast<size_t>(k)] : 0.0;
        if (lambda < cutoff)
            continue;
        // components with zero singular value carry nothing for the
        // reference row (its weight is positive), skip them
        if (s2 <= s2_max * 1e-24 || s2 <= 0.0)
            continue;
        res.retained[static_cast<size_t>(k)] = 1;
        const Eigen::VectorXd v = a.transpose() * eig.eigenvectors().col(n_rows - 1 - k) / std::sqrt(s2);
        rec += (x_ref.dot(v)) * v;
    }

    res.reconstructed_ref.assign(rec.data(), rec.data() + n_cols);
    return res;
}

std::vector<float> wpca_filter(PatchTrajectory& traj, std::span<const double> sigma_hat_sq,
                               const PrefilterParams& params, const MpTable& table)
{
    const int w = traj.members();
    const int r2 = traj.r * traj.r;
    const int channels = traj.channels;
    if (static_cast<int>(sigma_hat_sq.size()) != channels)
        throw DimensionError("wpca_filter: sigma count must match channels");

    traj.weights.assign(static_cast<size_t>(w) * channels, 0.0);
    std::vector<float> out(static_cast<size_t>(channels) * r2);
    std::vector<double> rows(static_cast<size_t>(w) * r2);
    std::vector<double> wcol(static_cast<size_t>(w));

    for (int c = 0; c < channels; ++c) {
        const float* ref = traj.member(traj.ref_member, c);
        const double var_c = sigma_hat_sq[static_cast<size_t>(c)];
        const double var_w = std::max(var_c, params.variance_floor);
        // two noisy observations of the same content differ by 2*r^2*sigma^2
        // in expectation; only the excess over that counts as dissimilarity,
        // so a clean trajectory averages with near-unit weights
        const double bias = 2.0 * r2 * var_c;

        // similarity weights against the reference patch
        double v1 = 0.0, v2 = 0.0;
        for (int i = 0; i < w; ++i) {
            const float* q = traj.member(i, c);
            double d2 = 0.0;
            for (int p = 0; p < r2; ++p) {
                const double d = ref[p] - q[p];
                d2 += d * d;
                rows[static_cast<size_t>(i) * r2 + p] = q[p];
            }
            const double wi = std::exp(-std::max(d2 - bias, 0.0) / (params.h * params.h * var_w));
            traj.weights[static_cast<size_t>(i) * channels + c] = wi;
            wcol[static_cast<size_t>(i)] = wi;
            v1 += wi;
            v2 += wi * wi;
        }

        // per-component cutoffs from the expected noise spectrum
        std::vector<double> delta(static_cast<size_t>(w), 0.0);
        if (!(w < 2 || v1 * v1 - v2 <= 1e-12 * v1 * v1)) {
            const double fac = v1 / (v1 * v1 - v2);
            const std::vector<double> shat =
                table.expected_singular_values(w, r2, wcol, sigma_hat_sq[static_cast<size_t>(c)]);
            for (int k = 0; k < w; ++k) {
                const double s = params.sv_safety * shat[static_cast<size_t>(k)];
                delta[static_cast<size_t>(k)] = fac * s * s;
            }
        }

        const WpcaResult res = wpca_core(rows, w, r2, wcol, traj.ref_member, delta);
        for (int p = 0; p < r2; ++p)
            out[static_cast<size_t>(c) * r2 + p] = static_cast<float>(res.reconstructed_ref[static_cast<size_t>(p)]);
    }
    return out;
}

namespace {

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

Image prefilter_frame(const std::vector<Image>& window, int ref,
                      const std::vector<FlowField>& flows, const std::vector<Mask>& masks,
                      const TransformedNoise& noise, const PrefilterParams& params,
                      const MpTable& table, int workers)
{
    const Image& ref_img = window[static_cast<size_t>(ref)];
    const int w = ref_img.width(), h = ref_img.height(), channels = ref_img.channels();
    const int r = params.r;

    // align every frame to the reference
    std::vector<Image> warped(window.size());
    for (size_t i = 0; i < window.size(); ++i) {
        if (static_cast<int>(i) == ref || flows[i].empty())
            warped[i] = window[i];
        else
            warped[i] = warp(window[i], flows[i]);
    }

    const std::vector<int> xs = patch_origins(w, r, params.stride);
    const std::vector<int> ys = patch_origins(h, r, params.stride);

    const size_t patch_values = static_cast<size_t>(channels) * r * r;
    std::vector<std::vector<float>> results(ys.size());

    parallel_chunks(static_cast<int>(ys.size()), workers, [&](int row) {
        std::vector<float>& out_row = results[static_cast<size_t>(row)];
        out_row.resize(xs.size() * patch_values);
        const int y0 = ys[static_cast<size_t>(row)];
        for (size_t xi = 0; xi < xs.size(); ++xi) {
            const int x0 = xs[xi];
            PatchTrajectory traj = collect_trajectory(warped, ref, masks, x0, y0, r,
                                                      params.occlusion_search_radius);
            const std::vector<double> shs = noise.sigma_hat_sq(x0, y0, r);
            const std::vector<float> filtered = wpca_filter(traj, shs, params, table);
            std::copy(filtered.begin(), filtered.end(), out_row.begin() + xi * patch_values);
        }
    });

    // uniform averaging of overlapping patch outputs, fixed order
    Image out(w, h, channels);
    std::vector<float> count(static_cast<size_t>(w) * h, 0.f);
    for (size_t row = 0; row < ys.size(); ++row) {
        const int y0 = ys[row];
        for (size_t xi = 0; xi < xs.size(); ++xi) {
            const int x0 = xs[xi];
            const float* patch = results[row].data() + xi * patch_values;
            for (int c = 0; c < channels; ++c) {
                float* dst = out.plane(c);
                for (int py = 0; py < r; ++py)
                    for (int px = 0; px < r; ++px)
                        dst[static_cast<size_t>(y0 + py) * w + x0 + px] +=
                            patch[(static_cast<size_t>(c) * r + py) * r + px];
            }
            for (int py = 0; py < r; ++py)
                for (int px = 0; px < r; ++px)
                    count[static_cast<size_t>(y0 + py) * w + x0 + px] += 1.f;
        }
    }
    for (int c = 0; c < channels; ++c) {
        float* dst = out.plane(c);
        for (size_t i = 0; i < count.size(); ++i)
            dst[i] /= count[i];
    }
    return out;
}

} // namespace rawden
