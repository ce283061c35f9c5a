#pragma once

#include <vector>

#include "rawden/image.hpp"
#include "rawden/noise_model.hpp"

namespace rawden {

// Local noise estimate for a denoising stage. The sensor curve is evaluated
// on the untransformed reference frame (values in the post-scaling domain)
// and propagated through the stage's color transform, so every patch gets
// its own per-channel variance.
struct TransformedNoise {
    const Image* raw_ref = nullptr;      // untransformed reference frame
    NoiseModel model;                    // per-ADU sensor curve
    std::vector<double> channel_scales;  // l_c per raw channel
    std::vector<double> matrix;          // transform, out_channels x in_channels
    int out_channels = 0;
    int in_channels = 0;

    // mean patch variance per raw channel, then through the transform
    std::vector<double> sigma_hat_sq(int x0, int y0, int r) const
    {
        if (!raw_ref || raw_ref->channels() != in_channels)
            throw DimensionError("TransformedNoise: raw reference channel mismatch");

        std::vector<double> bar(in_channels, 0.0);
        for (int c = 0; c < in_channels; ++c) {
            const double l = channel_scales[c];
            double acc = 0.0;
            for (int y = y0; y < y0 + r; ++y)
                for (int x = x0; x < x0 + r; ++x)
                    acc += l * l * model.variance_at(raw_ref->at(x, y, c) / l);
            bar[c] = acc / static_cast<double>(r * r);
        }
        return transform_variance(bar, matrix, out_channels, in_channels);
    }
};

} // namespace rawden
