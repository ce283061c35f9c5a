#include "rawden/color_transform.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace rawden {

ColorTransform::ColorTransform(std::vector<double> matrix, int size)
    : size_(size), fwd_(std::move(matrix))
{
    if (static_cast<int>(fwd_.size()) != size * size)
        throw DimensionError("ColorTransform: matrix size mismatch");

    Eigen::MatrixXd m(size, size);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            m(r, c) = fwd_[static_cast<size_t>(r) * size + c];

    const Eigen::MatrixXd inv = m.inverse();
    if (((m * inv) - Eigen::MatrixXd::Identity(size, size)).cwiseAbs().maxCoeff() > 1e-10)
        throw ParameterError("ColorTransform: matrix is not invertible to 1e-10");

    inv_.resize(fwd_.size());
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            inv_[static_cast<size_t>(r) * size + c] = inv(r, c);
}

namespace {

Image apply_matrix(const Image& in, const std::vector<double>& m, int size)
{
    if (in.channels() != size)
        throw DimensionError("color transform: expected " + std::to_string(size) + " channels, got " +
                             std::to_string(in.channels()));

    Image out(in.width(), in.height(), size);
    const size_t n = in.plane_size();
    for (int r = 0; r < size; ++r) {
        float* dst = out.plane(r);
        for (int c = 0; c < size; ++c) {
            const float t = static_cast<float>(m[static_cast<size_t>(r) * size + c]);
            const float* src = in.plane(c);
            if (c == 0)
                for (size_t i = 0; i < n; ++i)
                    dst[i] = t * src[i];
            else
                for (size_t i = 0; i < n; ++i)
                    dst[i] += t * src[i];
        }
    }
    return out;
}

} // namespace

Image ColorTransform::apply(const Image& in) const
{
    return apply_matrix(in, fwd_, size_);
}

Image ColorTransform::apply_inverse(const Image& in) const
{
    return apply_matrix(in, inv_, size_);
}

Image ColorTransform::luma(const Image& in) const
{
    if (in.channels() != size_)
        throw DimensionError("luma: channel count mismatch");
    Image out(in.width(), in.height(), 1);
    const size_t n = in.plane_size();
    float* dst = out.plane(0);
    for (int c = 0; c < size_; ++c) {
        const float t = static_cast<float>(fwd_[c]);
        const float* src = in.plane(c);
        if (c == 0)
            for (size_t i = 0; i < n; ++i)
                dst[i] = t * src[i];
        else
            for (size_t i = 0; i < n; ++i)
                dst[i] += t * src[i];
    }
    return out;
}

const ColorTransform& ColorTransform::yuvw()
{
    static const ColorTransform t({
        0.3162,  0.65,   0.2345,  0.65,
       -0.5,     0.5,   -0.5,     0.5,
        0.65,    0.2784, -0.65,  -0.2784,
       -0.2784,  0.65,   0.2784, -0.65,
    }, 4);
    return t;
}

const ColorTransform& ColorTransform::yuv()
{
    static const ColorTransform t({
        0.299,  0.587,  0.114,
       -0.147, -0.289,  0.436,
        0.615, -0.515, -0.100,
    }, 3);
    return t;
}

CfaFrame apply_early_isp(const CfaFrame& frame, const IspParams& isp)
{
    const BayerOffsets o = bayer_offsets(frame.phase);
    // gain per 2x2 tile offset
    double gain_at[2][2];
    gain_at[o.ry][o.rx] = isp.wb_gains[0];
    gain_at[o.g1y][o.g1x] = isp.wb_gains[1];
    gain_at[o.by][o.bx] = isp.wb_gains[2];
    gain_at[o.g2y][o.g2x] = isp.wb_gains[3];

    CfaFrame out;
    out.phase = frame.phase;
    out.img = Image(frame.img.width(), frame.img.height(), 1);
    for (int y = 0; y < frame.img.height(); ++y) {
        const double gains[2] = {gain_at[y & 1][0], gain_at[y & 1][1]};
        for (int x = 0; x < frame.img.width(); ++x)
            out.img.at(x, y) = static_cast<float>((frame.img.at(x, y) - isp.black_level) * gains[x & 1]);
    }
    return out;
}

RgbFrame apply_finishing_isp(const RgbFrame& frame, const IspParams& isp)
{
    if (frame.channels() != 3)
        throw DimensionError("apply_finishing_isp: expected 3 channels");
    if (isp.gamma <= 0)
        throw ParameterError("apply_finishing_isp: gamma must be positive");

    const double norm = isp.normalization();
    const double inv_gamma = 1.0 / isp.gamma;
    RgbFrame out(frame.width(), frame.height(), 3);
    const size_t n = frame.plane_size();
    for (size_t i = 0; i < n; ++i) {
        double rgb[3];
        for (int c = 0; c < 3; ++c) {
            double v = frame.plane(c)[i] / norm;
            rgb[c] = std::clamp(v, 0.0, 1.0);
        }
        for (int c = 0; c < 3; ++c) {
            double v = isp.ccm[c][0] * rgb[0] + isp.ccm[c][1] * rgb[1] + isp.ccm[c][2] * rgb[2];
            v = std::clamp(v, 0.0, 1.0);
            out.plane(c)[i] = static_cast<float>(std::pow(v, inv_gamma));
        }
    }
    return out;
}

} // namespace rawden
