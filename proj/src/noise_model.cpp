#include "rawden/noise_model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rawden/rng.hpp"

namespace rawden {

Image inject_noise(const Image& clean, const NoiseModel& model, uint64_t seed, uint64_t frame_index)
{
    Image out(clean.width(), clean.height(), clean.channels());
    const size_t n = clean.size();
    for (size_t i = 0; i < n; ++i) {
        const double x = clean.data()[i];
        const double var = model.a * x + model.b;
        if (var < 0.0)
            throw ParameterError("inject_noise: negative variance at x=" + std::to_string(x));
        const double z = rng::normal_at(seed, frame_index, i);
        out.data()[i] = static_cast<float>(x + model.offset + std::sqrt(var) * z);
    }
    return out;
}

namespace {

// least-squares line y = slope*x + icept
void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& icept)
{
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-12) {
        slope = 0.0;
        icept = sy / static_cast<double>(n);
        return;
    }
    slope = (n * sxy - sx * sy) / det;
    icept = (sy - slope * sx) / static_cast<double>(n);
}

} // namespace

IsoCalibration::IsoCalibration(std::vector<Anchor> anchors, double offset, std::array<double, 4> wb_gains)
    : anchors_(std::move(anchors)), offset_(offset), wb_gains_(wb_gains)
{
    if (anchors_.size() < 2)
        throw ParameterError("IsoCalibration needs at least two anchor points");

    std::vector<double> isos, as, sbs;
    for (const auto& an : anchors_) {
        if (an.iso <= 0 || an.a < 0 || an.b < 0)
            throw ParameterError("IsoCalibration: anchors must have iso > 0, a >= 0, b >= 0");
        isos.push_back(an.iso);
        as.push_back(an.a);
        sbs.push_back(std::sqrt(an.b));
    }
    fit_line(isos, as, a_slope_, a_icept_);
    fit_line(isos, sbs, sb_slope_, sb_icept_);
}

NoiseModel IsoCalibration::at_iso(double iso) const
{
    if (iso <= 0)
        throw ParameterError("at_iso: iso must be positive");
    NoiseModel m;
    m.a = std::max(0.0, a_slope_ * iso + a_icept_);
    const double sb = std::max(0.0, sb_slope_ * iso + sb_icept_);
    m.b = sb * sb;
    m.offset = offset_;
    m.channel_scales = wb_gains_;
    m.iso = iso;
    return m;
}

IsoCalibration read_calibration(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open calibration '" + path + "'");

    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("calibration '" + path + "': " + e.what());
    }

    try {
        std::vector<IsoCalibration::Anchor> anchors;
        for (const auto& a : j.at("anchors"))
            anchors.push_back({a.at("iso").get<double>(), a.at("a").get<double>(), a.at("b").get<double>()});
        double offset = j.value("offset", 0.0);
        std::array<double, 4> gains = {1, 1, 1, 1};
        if (j.contains("wb_gains"))
            for (int i = 0; i < 4; ++i)
                gains[i] = j["wb_gains"].at(i).get<double>();
        return IsoCalibration(std::move(anchors), offset, gains);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("calibration '" + path + "': " + e.what());
    }
}

double patch_variance(std::span<const float> values, const NoiseModel& model, double channel_scale)
{
    if (values.empty())
        throw DimensionError("patch_variance: empty patch");
    const double l = channel_scale;
    double acc = 0.0;
    for (const float v : values)
        acc += l * l * model.variance_at(v / l);
    return acc / static_cast<double>(values.size());
}

std::vector<double> transform_variance(std::span<const double> variances,
                                       const std::vector<double>& matrix, int rows, int cols)
{
    if (static_cast<int>(variances.size()) != cols || static_cast<int>(matrix.size()) != rows * cols)
        throw DimensionError("transform_variance: dimension mismatch");
    std::vector<double> out(rows, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double t = matrix[static_cast<size_t>(r) * cols + c];
            out[r] += t * t * variances[c];
        }
    return out;
}

} // namespace rawden
