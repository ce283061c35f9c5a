#include "rawden/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace rawden {

PsnrResult psnr(const Image& a, const Image& b, double peak)
{
    if (!a.same_shape(b))
        throw DimensionError("psnr: frame shapes differ");

    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());

    if (mse == 0.0)
        return {99.0, true};
    return {10.0 * std::log10(peak * peak / mse), false};
}

namespace {

std::vector<double> luma_601(const Image& img)
{
    std::vector<double> y(img.plane_size());
    if (img.channels() == 1) {
        for (size_t i = 0; i < y.size(); ++i)
            y[i] = img.data()[i];
    } else if (img.channels() == 3) {
        const float* r = img.plane(0);
        const float* g = img.plane(1);
        const float* b = img.plane(2);
        for (size_t i = 0; i < y.size(); ++i)
            y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    } else {
        throw DimensionError("ssim: expected 1 or 3 channels");
    }
    return y;
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

const std::vector<double>& gaussian_kernel()
{
    static const std::vector<double> k = [] {
        std::vector<double> v(kWin);
        double sum = 0;
        for (int i = 0; i < kWin; ++i) {
            const double t = i - (kWin - 1) / 2.0;
            v[static_cast<size_t>(i)] = std::exp(-0.5 * t * t / (kSigma * kSigma));
            sum += v[static_cast<size_t>(i)];
        }
        for (auto& x : v)
            x /= sum;
        return v;
    }();
    return k;
}

// valid-region separable filtering: output size (w-10) x (h-10)
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h, int& ow, int& oh)
{
    const auto& k = gaussian_kernel();
    ow = w - kWin + 1;
    oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int t = 0; t < kWin; ++t)
                acc += k[static_cast<size_t>(t)] * img[static_cast<size_t>(y) * w + x + t];
            tmp[static_cast<size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int t = 0; t < kWin; ++t)
                acc += k[static_cast<size_t>(t)] * tmp[static_cast<size_t>(y + t) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

struct SsimTerms {
    double mean_ssim;
    double mean_cs;
};

SsimTerms ssim_terms(const std::vector<double>& x, const std::vector<double>& y, int w, int h, double peak)
{
    if (w < kWin || h < kWin)
        throw DimensionError("ssim: frame smaller than the filter window");

    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }

    int ow = 0, oh = 0;
    const std::vector<double> mx = filter_valid(x, w, h, ow, oh);
    const std::vector<double> my = filter_valid(y, w, h, ow, oh);
    const std::vector<double> mxx = filter_valid(xx, w, h, ow, oh);
    const std::vector<double> myy = filter_valid(yy, w, h, ow, oh);
    const std::vector<double> mxy = filter_valid(xy, w, h, ow, oh);

    double acc_ssim = 0, acc_cs = 0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        const double l = (2 * mx[i] * my[i] + c1) / (mx[i] * mx[i] + my[i] * my[i] + c1);
        const double cs = (2 * cxy + c2) / (vx + vy + c2);
        acc_ssim += l * cs;
        acc_cs += cs;
    }
    const double n = static_cast<double>(mx.size());
    return {acc_ssim / n, acc_cs / n};
}

// 2x2 mean then decimation, as in the canonical multi-scale implementation
std::vector<double> downsample2(const std::vector<double>& img, int w, int h)
{
    const int ow = w / 2, oh = h / 2;
    std::vector<double> out(static_cast<size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[static_cast<size_t>(y) * ow + x] =
                0.25 * (img[static_cast<size_t>(2 * y) * w + 2 * x] +
                        img[static_cast<size_t>(2 * y) * w + 2 * x + 1] +
                        img[static_cast<size_t>(2 * y + 1) * w + 2 * x] +
                        img[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1]);
    return out;
}

} // namespace

double ssim(const Image& a, const Image& b, double peak)
{
    if (!a.same_shape(b))
        throw DimensionError("ssim: frame shapes differ");
    const std::vector<double> x = luma_601(a);
    const std::vector<double> y = luma_601(b);
    return ssim_terms(x, y, a.width(), a.height(), peak).mean_ssim;
}

double ms_ssim(const Image& a, const Image& b, double peak)
{
    if (!a.same_shape(b))
        throw DimensionError("ms_ssim: frame shapes differ");

    constexpr int kScales = 5;
    constexpr double kWeights[kScales] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    constexpr int kMinSize = (kWin - 1) * (1 << (kScales - 1)) + 1; // 161

    if (std::min(a.width(), a.height()) < kMinSize) {
        std::fprintf(stderr, "ms_ssim: frame below %d px, falling back to SSIM\n", kMinSize);
        return ssim(a, b, peak);
    }

    std::vector<double> x = luma_601(a);
    std::vector<double> y = luma_601(b);
    int w = a.width(), h = a.height();

    double score = 1.0;
    for (int s = 0; s < kScales; ++s) {
        const SsimTerms terms = ssim_terms(x, y, w, h, peak);
        if (s == kScales - 1) {
            score *= std::pow(std::max(terms.mean_ssim, 0.0), kWeights[s]);
        } else {
            score *= std::pow(std::max(terms.mean_cs, 0.0), kWeights[s]);
            x = downsample2(x, w, h);
            y = downsample2(y, w, h);
            w /= 2;
            h /= 2;
        }
    }
    return score;
}

MetricReport score_sequence(const std::vector<Image>& a, const std::vector<Image>& b, double peak)
{
    if (a.size() != b.size())
        throw DimensionError("score_sequence: sequences differ in length");

    MetricReport report;
    for (size_t i = 0; i < a.size(); ++i) {
        FrameScore fs;
        fs.frame = static_cast<int>(i);
        fs.psnr = psnr(a[i], b[i], peak).db;
        fs.ssim = ssim(a[i], b[i], peak);
        fs.msssim = ms_ssim(a[i], b[i], peak);
        report.mean_psnr += fs.psnr;
        report.mean_ssim += fs.ssim;
        report.mean_msssim += fs.msssim;
        report.frames.push_back(fs);
    }
    const double n = static_cast<double>(a.size());
    report.mean_psnr /= n;
    report.mean_ssim /= n;
    report.mean_msssim /= n;
    return report;
}

void write_report_csv(const std::string& path, const MetricReport& report)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << "frame,psnr,ssim,msssim\n";
    for (const FrameScore& f : report.frames)
        out << f.frame << "," << f.psnr << "," << f.ssim << "," << f.msssim << "\n";
}

void write_report_json(const std::string& path, const MetricReport& report)
{
    nlohmann::json j;
    j["mean_psnr"] = report.mean_psnr;
    j["mean_ssim"] = report.mean_ssim;
    j["mean_msssim"] = report.mean_msssim;
    j["config_hash"] = report.config_hash;
    j["runtime_seconds"] = report.runtime_seconds;
    for (const FrameScore& f : report.frames)
        j["frames"].push_back({{"frame", f.frame}, {"psnr", f.psnr}, {"ssim", f.ssim}, {"msssim", f.msssim}});

    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

} // namespace rawden
