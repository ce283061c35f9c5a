#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rawden/image.hpp"

namespace rawden {

// Signal-dependent sensor noise: a read value is distributed as
// N(x_true + offset, a*x_true + b). channel_scales are the per-plane
// multipliers (white balance and similar) applied after offset removal.
struct NoiseModel {
    double a = 0.0;        // variance slope, per ADU
    double b = 0.0;        // variance intercept, ADU^2
    double offset = 0.0;   // black level
    std::array<double, 4> channel_scales = {1.0, 1.0, 1.0, 1.0};
    double iso = 0.0;

    // variance of the sensor read at true value x; negative model output
    // is floored at zero (the curve is unreliable below the black level)
    double variance_at(double x) const
    {
        const double v = a * x + b;
        return v > 0.0 ? v : 0.0;
    }

    // model whose noise standard deviation is `factor` times this one's
    NoiseModel scaled_sigma(double factor) const
    {
        NoiseModel m = *this;
        m.a = a * factor * factor;
        m.b = b * factor * factor;
        return m;
    }

    bool is_zero() const { return a == 0.0 && b == 0.0; }
};

// After the first denoising stage only a fraction alpha of the noise
// remains, so the stage-2 curve is the sensor model with sigma scaled
// by alpha.
inline NoiseModel stage2_noise_curve(const NoiseModel& model, double alpha)
{
    return model.scaled_sigma(alpha);
}

// Draws x_read ~ N(x_true + offset, a*x_true + b) per pixel. Deterministic
// given (seed, frame_index): the generator is keyed per pixel, so results
// do not depend on evaluation order.
Image inject_noise(const Image& clean, const NoiseModel& model, uint64_t seed, uint64_t frame_index = 0);

// Per-ISO anchors with linear least-squares fits of a(iso) and sqrt(b)(iso).
class IsoCalibration {
public:
    struct Anchor {
        double iso, a, b;
    };

    explicit IsoCalibration(std::vector<Anchor> anchors, double offset = 0.0,
                            std::array<double, 4> wb_gains = {1, 1, 1, 1});

    NoiseModel at_iso(double iso) const;
    const std::vector<Anchor>& anchors() const { return anchors_; }

private:
    std::vector<Anchor> anchors_;
    double offset_;
    std::array<double, 4> wb_gains_;
    double a_slope_, a_icept_;       // a(iso)
    double sb_slope_, sb_icept_;     // sqrt(b)(iso)
};

IsoCalibration read_calibration(const std::string& path);

// Eq-style patch variance: mean over patch pixels of l_c^2 * sigma~^2(x/l_c),
// for values x already in the post-scaling domain.
double patch_variance(std::span<const float> values, const NoiseModel& model, double channel_scale);

// Propagates independent per-channel variances through a color matrix row
// by row: out_c = sum_k T(c,k)^2 in_k.
std::vector<double> transform_variance(std::span<const double> variances,
                                       const std::vector<double>& matrix, int rows, int cols);

} // namespace rawden
