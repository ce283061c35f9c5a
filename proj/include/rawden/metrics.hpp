#pragma once

#include <string>
#include <vector>

#include "rawden/image.hpp"

namespace rawden {

struct PsnrResult {
    double db = 0.0;
    bool identical = false; // frames matched exactly; db is capped at 99
};

// 10*log10(peak^2 / MSE) over all channels and pixels.
PsnrResult psnr(const Image& a, const Image& b, double peak);

// Single-scale SSIM on the BT.601 luma plane: 11x11 Gaussian window with
// sigma 1.5, K1 = 0.01, K2 = 0.03, mean over the valid region.
double ssim(const Image& a, const Image& b, double peak);

// Five-scale MS-SSIM with the canonical weights. Frames below the minimum
// size (161 px) fall back to SSIM with a warning on stderr.
double ms_ssim(const Image& a, const Image& b, double peak);

struct FrameScore {
    int frame = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double msssim = 0.0;
};

struct MetricReport {
    std::vector<FrameScore> frames;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_msssim = 0.0;
    std::string config_hash;
    double runtime_seconds = 0.0;
};

MetricReport score_sequence(const std::vector<Image>& a, const std::vector<Image>& b, double peak);

void write_report_csv(const std::string& path, const MetricReport& report);
void write_report_json(const std::string& path, const MetricReport& report);

} // namespace rawden
