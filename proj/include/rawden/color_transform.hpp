#pragma once

#include <array>
#include <vector>

#include "rawden/image.hpp"

namespace rawden {

// Square color transform with its numerically computed inverse. The forward
// matrices are not orthogonal: luma favors green, and every chroma row sums
// to zero so gray pixels have null chroma.
class ColorTransform {
public:
    ColorTransform(std::vector<double> matrix, int size);

    int size() const { return size_; }
    double coeff(int row, int col) const { return fwd_[static_cast<size_t>(row) * size_ + col]; }
    const std::vector<double>& matrix() const { return fwd_; }
    const std::vector<double>& inverse() const { return inv_; }

    Image apply(const Image& in) const;
    Image apply_inverse(const Image& in) const;

    // first matrix row only; the flow estimator runs on this plane
    Image luma(const Image& in) const;

    // RG1BG2 -> YUVW (4 channels) and RGB -> YUV (3 channels)
    static const ColorTransform& yuvw();
    static const ColorTransform& yuv();

private:
    int size_;
    std::vector<double> fwd_;
    std::vector<double> inv_;
};

// Black level and white balance, applied at the very start of the pipeline.
// ccm/gamma/white_level drive the finishing stage.
struct IspParams {
    double black_level = 0.0;
    std::array<double, 4> wb_gains = {1, 1, 1, 1};
    std::array<std::array<double, 3>, 3> ccm = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    double gamma = 2.2;
    double white_level = 65535.0;

    double normalization() const { return white_level - black_level; }
    // gains for the demosaicked domain; green is the mean of G1 and G2
    std::array<double, 3> rgb_gains() const
    {
        return {wb_gains[0], 0.5 * (wb_gains[1] + wb_gains[3]), wb_gains[2]};
    }
};

// out = (in - black) * gain at each CFA site. Negative values are kept.
CfaFrame apply_early_isp(const CfaFrame& frame, const IspParams& isp);

// normalize -> clamp [0,1] -> CCM -> clamp -> gamma. Output in [0,1];
// quantization to 16 bits happens in the writer.
RgbFrame apply_finishing_isp(const RgbFrame& frame, const IspParams& isp);

} // namespace rawden
