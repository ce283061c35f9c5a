#include <doctest.h>

#include <cmath>

#include "rawden/metrics.hpp"
#include "rawden/rng.hpp"
#include "support.hpp"

using namespace rawden;

namespace {

// independent SSIM oracle: direct per-window Gaussian sums, no separable
// filtering, no shared code with the implementation
double ssim_oracle(const Image& a, const Image& b, double peak)
{
    const int w = a.width(), h = a.height();
    std::vector<double> x(a.plane_size()), y(a.plane_size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (a.channels() == 3) {
            x[i] = 0.299 * a.plane(0)[i] + 0.587 * a.plane(1)[i] + 0.114 * a.plane(2)[i];
            y[i] = 0.299 * b.plane(0)[i] + 0.587 * b.plane(1)[i] + 0.114 * b.plane(2)[i];
        } else {
            x[i] = a.data()[i];
            y[i] = b.data()[i];
        }
    }

    double g[11][11];
    double gsum = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double di = i - 5.0, dj = j - 5.0;
            g[i][j] = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
            gsum += g[i][j];
        }
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j)
            g[i][j] /= gsum;

    const double c1 = 0.01 * peak * 0.01 * peak;
    const double c2 = 0.03 * peak * 0.03 * peak;
    double acc = 0;
    int n = 0;
    for (int cy = 0; cy + 11 <= h; ++cy)
        for (int cx = 0; cx + 11 <= w; ++cx) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double xv = x[static_cast<size_t>(cy + i) * w + cx + j];
                    const double yv = y[static_cast<size_t>(cy + i) * w + cx + j];
                    mx += g[i][j] * xv;
                    my += g[i][j] * yv;
                    sxx += g[i][j] * xv * xv;
                    syy += g[i][j] * yv * yv;
                    sxy += g[i][j] * xv * yv;
                }
            const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++n;
        }
    return acc / n;
}

} // namespace

TEST_CASE("psnr: identical frames are flagged and capped")
{
    const Image a = testsup::random_frame(8, 8, 3, 1, 0.f, 255.f);
    const PsnrResult r = psnr(a, a, 255.0);
    CHECK(r.identical);
    CHECK(r.db == doctest::Approx(99.0));
}

TEST_CASE("psnr: constant difference closed form")
{
    const Image a(16, 16, 3, 100.f);
    Image b(16, 16, 3, 116.f);
    const PsnrResult r = psnr(a, b, 255.0);
    CHECK(r.db == doctest::Approx(20.0 * std::log10(255.0 / 16.0)).epsilon(1e-9));
}

TEST_CASE("psnr: doubling differences costs 6.0206 dB")
{
    const Image base = testsup::random_frame(16, 16, 1, 2, 0.f, 200.f);
    Image d1 = base, d2 = base;
    for (size_t i = 0; i < base.size(); ++i) {
        const float eps = static_cast<float>(rng::normal_at(3, 0, i));
        d1.data()[i] += eps;
        d2.data()[i] += 2 * eps;
    }
    const double p1 = psnr(base, d1, 255.0).db;
    const double p2 = psnr(base, d2, 255.0).db;
    // float storage rounds the doubled differences slightly
    CHECK(p1 - p2 == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-5));
}

TEST_CASE("psnr decreases as noise amplitude grows")
{
    const Image base = testsup::random_frame(32, 32, 1, 4, 20.f, 230.f);
    double prev = 1e9;
    for (double amp : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        Image noisy = base;
        for (size_t i = 0; i < base.size(); ++i)
            noisy.data()[i] += static_cast<float>(amp * rng::normal_at(5, 0, i));
        const double p = psnr(base, noisy, 255.0).db;
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("psnr and ssim are symmetric")
{
    const Image a = testsup::random_frame(32, 32, 3, 6, 0.f, 255.f);
    Image b = a;
    for (size_t i = 0; i < b.size(); ++i)
        b.data()[i] += static_cast<float>(3.0 * rng::normal_at(7, 0, i));
    CHECK(psnr(a, b, 255.0).db == doctest::Approx(psnr(b, a, 255.0).db).epsilon(1e-12));
    CHECK(ssim(a, b, 255.0) == doctest::Approx(ssim(b, a, 255.0)).epsilon(1e-12));
}

TEST_CASE("ssim: identical frames score 1")
{
    const Image a = testsup::rgb_frame(48, 48);
    CHECK(ssim(a, a, 255.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssim: non-constant frame vs zero scores below 1")
{
    const Image a = testsup::rgb_frame(48, 48);
    const Image zero(48, 48, 3, 0.f);
    CHECK(ssim(a, zero, 255.0) < 1.0);
}

TEST_CASE("ssim agrees with the brute-force oracle")
{
    for (int trial = 0; trial < 5; ++trial) {
        const Image a = testsup::random_frame(40, 36, 3, 100 + trial, 0.f, 255.f);
        Image b = a;
        for (size_t i = 0; i < b.size(); ++i)
            b.data()[i] += static_cast<float>(8.0 * rng::normal_at(200 + trial, 0, i));
        const double mine = ssim(a, b, 255.0);
        const double oracle = ssim_oracle(a, b, 255.0);
        CHECK(std::abs(mine - oracle) < 1e-3);
    }
}

TEST_CASE("ms_ssim: identical frames score 1, small frames fall back")
{
    const Image small = testsup::rgb_frame(64, 64);
    CHECK(ms_ssim(small, small, 255.0) == doctest::Approx(ssim(small, small, 255.0)).epsilon(1e-9));

    const Image big = testsup::rgb_frame(176, 176);
    CHECK(ms_ssim(big, big, 255.0) == doctest::Approx(1.0).epsilon(1e-9));
    Image noisy = big;
    for (size_t i = 0; i < noisy.size(); ++i)
        noisy.data()[i] += static_cast<float>(10.0 * rng::normal_at(9, 0, i));
    const double score = ms_ssim(big, noisy, 255.0);
    CHECK(score < 1.0);
    CHECK(score > 0.0);
}

TEST_CASE("score_sequence and reports")
{
    std::vector<Image> a, b;
    for (int f = 0; f < 3; ++f) {
        a.push_back(testsup::rgb_frame(40, 40, f));
        Image noisy = a.back();
        for (size_t i = 0; i < noisy.size(); ++i)
            noisy.data()[i] += static_cast<float>(2.0 * rng::normal_at(10 + f, 0, i));
        b.push_back(std::move(noisy));
    }
    const MetricReport report = score_sequence(a, b, 255.0);
    CHECK(report.frames.size() == 3);
    CHECK(report.mean_psnr > 0.0);
    CHECK(report.mean_ssim > 0.0);
    CHECK(report.mean_ssim <= 1.0);
}
