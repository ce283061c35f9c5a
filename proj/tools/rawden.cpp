// rawden -- two-stage RAW video denoiser CLI.
//
// Subcommands: denoise, inject, demosaic, metrics, ablate.
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 dimension error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rawden/pipeline.hpp"

namespace fs = std::filesystem;
using namespace rawden;

namespace {

std::vector<CfaFrame> load_cfa_sequence(const std::string& dir, BayerPhase phase)
{
    std::vector<CfaFrame> frames;
    for (const std::string& path : list_frames(dir)) {
        CfaFrame f;
        f.img = read_netpbm(path);
        if (f.img.channels() != 1)
            throw FormatError(path + ": expected a P5 graymap for CFA data", 0);
        f.phase = phase;
        frames.push_back(std::move(f));
    }
    if (frames.empty())
        throw IoError("no .pgm frames found in '" + dir + "'");
    return frames;
}

std::vector<Image> load_rgb_sequence(const std::string& dir)
{
    std::vector<Image> frames;
    for (const std::string& path : list_frames(dir)) {
        Image img = read_netpbm(path);
        if (img.channels() != 3)
            throw FormatError(path + ": expected a P6 pixmap", 0);
        frames.push_back(std::move(img));
    }
    if (frames.empty())
        throw IoError("no .ppm frames found in '" + dir + "'");
    return frames;
}

NoiseModel resolve_noise_model(const Sidecar& sidecar, const std::string& calib_path)
{
    if (!calib_path.empty()) {
        const IsoCalibration calib = read_calibration(calib_path);
        NoiseModel m = calib.at_iso(sidecar.iso);
        m.offset = sidecar.black_level;
        m.channel_scales = sidecar.wb_gains;
        return m;
    }
    if (sidecar.noise_a && sidecar.noise_b) {
        NoiseModel m;
        m.a = *sidecar.noise_a;
        m.b = *sidecar.noise_b;
        m.offset = sidecar.black_level;
        m.channel_scales = sidecar.wb_gains;
        m.iso = sidecar.iso;
        return m;
    }
    throw ConfigError("no noise model: provide --calib or a 'noise' block in the sidecar");
}

void write_rgb_sequence(const std::string& dir, const std::vector<RgbFrame>& frames)
{
    fs::create_directories(dir);
    for (size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.ppm", i);
        // pipeline output is [0,1]; quantize to 16 bits here
        Image scaled(frames[i].width(), frames[i].height(), 3);
        for (size_t p = 0; p < frames[i].size(); ++p)
            scaled.data()[p] = frames[i].data()[p] * 65535.f;
        write_netpbm((fs::path(dir) / name).string(), scaled);
    }
}

int cmd_denoise(const std::string& in_dir, const std::string& sidecar_path,
                const std::string& config_path, const std::string& calib_path,
                const std::string& out_dir)
{
    const Sidecar sidecar = read_sidecar(sidecar_path);
    const NoiseModel model = resolve_noise_model(sidecar, calib_path);
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : config_from_json_file(config_path);

    const std::vector<CfaFrame> frames = load_cfa_sequence(in_dir, sidecar.phase);
    const std::vector<RgbFrame> result = run_pipeline(frames, sidecar, model, config);
    write_rgb_sequence(out_dir, result);
    std::printf("denoised %zu frame(s) -> %s\n", result.size(), out_dir.c_str());
    return 0;
}

int cmd_inject(const std::string& in_dir, const std::string& calib_path, double iso,
               uint64_t seed, const std::string& out_dir, const std::string& sidecar_out,
               const std::string& phase_name, double black_level)
{
    const IsoCalibration calib = read_calibration(calib_path);
    NoiseModel model = calib.at_iso(iso);
    model.offset = black_level;

    const BayerPhase phase = bayer_phase_from_string(phase_name);
    const std::vector<CfaFrame> frames = load_cfa_sequence(in_dir, phase);

    fs::create_directories(out_dir);
    for (size_t i = 0; i < frames.size(); ++i) {
        const Image noisy = inject_noise(frames[i].img, model, seed, i);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.pgm", i);
        write_netpbm((fs::path(out_dir) / name).string(), noisy);
    }

    if (!sidecar_out.empty()) {
        Sidecar s;
        s.phase = phase;
        s.black_level = black_level;
        s.iso = iso;
        s.noise_a = model.a;
        s.noise_b = model.b;
        write_sidecar(sidecar_out, s);
    }
    std::printf("injected noise (iso %.0f, seed %llu) into %zu frame(s) -> %s\n", iso,
                static_cast<unsigned long long>(seed), frames.size(), out_dir.c_str());
    return 0;
}

int cmd_demosaic(const std::string& in_path, const std::string& sidecar_path, const std::string& out_path)
{
    const Sidecar sidecar = read_sidecar(sidecar_path);
    CfaFrame frame;
    frame.img = read_netpbm(in_path);
    if (frame.img.channels() != 1)
        throw FormatError(in_path + ": expected a P5 graymap", 0);
    frame.phase = sidecar.phase;
    write_netpbm(out_path, demosaic(frame));
    std::printf("demosaicked %s -> %s\n", in_path.c_str(), out_path.c_str());
    return 0;
}

int cmd_metrics(const std::string& dir_a, const std::string& dir_b, const std::string& csv_path,
                const std::string& json_path)
{
    const std::vector<Image> a = load_rgb_sequence(dir_a);
    const std::vector<Image> b = load_rgb_sequence(dir_b);
    const MetricReport report = score_sequence(a, b, 65535.0);

    if (!csv_path.empty())
        write_report_csv(csv_path, report);
    if (!json_path.empty())
        write_report_json(json_path, report);
    std::printf("frames %zu  PSNR %.4f dB  SSIM %.6f  MS-SSIM %.6f\n", report.frames.size(),
                report.mean_psnr, report.mean_ssim, report.mean_msssim);
    return 0;
}

int cmd_ablate(const std::string& in_dir, const std::string& sidecar_path,
               const std::string& config_path, const std::string& calib_path,
               const std::string& grid_path, const std::string& clean_dir,
               const std::string& report_path)
{
    const Sidecar sidecar = read_sidecar(sidecar_path);
    const NoiseModel model = resolve_noise_model(sidecar, calib_path);
    PipelineConfig base = config_path.empty() ? PipelineConfig{} : config_from_json_file(config_path);

    std::ifstream grid_in(grid_path);
    if (!grid_in)
        throw IoError("cannot open grid '" + grid_path + "'");
    nlohmann::json grid;
    try {
        grid_in >> grid;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    if (!grid.is_array())
        throw ConfigError("grid must be a JSON array of override objects");
    std::vector<std::string> overrides;
    for (const auto& entry : grid)
        overrides.push_back(entry.dump());

    const std::vector<CfaFrame> frames = load_cfa_sequence(in_dir, sidecar.phase);
    const std::vector<Image> clean = load_rgb_sequence(clean_dir);

    const std::vector<AblationRow> rows = ablate(frames, sidecar, model, base, overrides, clean);
    write_ablation_csv(report_path, rows);
    for (const AblationRow& r : rows)
        std::printf("%s %s  PSNR %.4f  SSIM %.6f  MS-SSIM %.6f  (%.1fs)\n", r.config_id.c_str(),
                    r.overrides.c_str(), r.psnr, r.ssim, r.msssim, r.runtime_seconds);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rawden - two-stage self-similarity denoiser for Bayer RAW video"};
    app.require_subcommand(1);

    std::string in_dir, out_dir, sidecar_path, config_path, calib_path;
    std::string grid_path, clean_dir, report_path, json_path;
    std::string phase_name = "RGGB";
    double iso = 1600.0, black_level = 0.0;
    uint64_t seed = 0;

    auto* denoise = app.add_subcommand("denoise", "denoise a CFA sequence to sRGB frames");
    denoise->add_option("--in", in_dir, "input directory of 16-bit .pgm CFA frames")->required();
    denoise->add_option("--sidecar", sidecar_path, "sequence sidecar JSON")->required();
    denoise->add_option("--config", config_path, "pipeline config JSON");
    denoise->add_option("--calib", calib_path, "noise calibration JSON");
    denoise->add_option("--out", out_dir, "output directory")->required();

    auto* inject = app.add_subcommand("inject", "add synthetic sensor noise to clean CFA frames");
    inject->add_option("--in", in_dir, "input directory of clean .pgm CFA frames")->required();
    inject->add_option("--calib", calib_path, "noise calibration JSON")->required();
    inject->add_option("--iso", iso, "target ISO")->required();
    inject->add_option("--seed", seed, "noise seed");
    inject->add_option("--out", out_dir, "output directory")->required();
    inject->add_option("--sidecar-out", sidecar_path, "write a sidecar for the noisy sequence");
    inject->add_option("--phase", phase_name, "Bayer phase (RGGB/GRBG/GBRG/BGGR)");
    inject->add_option("--black-level", black_level, "sensor offset added to the output");

    auto* demo = app.add_subcommand("demosaic", "demosaic a single CFA frame");
    demo->add_option("--in", in_dir, "input .pgm frame")->required();
    demo->add_option("--sidecar", sidecar_path, "sidecar JSON (for the phase)")->required();
    demo->add_option("--out", out_dir, "output .ppm frame")->required();

    auto* metrics = app.add_subcommand("metrics", "PSNR/SSIM/MS-SSIM between two sequences");
    metrics->add_option("--a", in_dir, "first directory of .ppm frames")->required();
    metrics->add_option("--b", clean_dir, "second directory of .ppm frames")->required();
    metrics->add_option("--report", report_path, "CSV report path");
    metrics->add_option("--json", json_path, "JSON summary path");

    auto* ablate_cmd = app.add_subcommand("ablate", "run a config grid and score against a clean reference");
    ablate_cmd->add_option("--in", in_dir, "noisy .pgm CFA frames")->required();
    ablate_cmd->add_option("--sidecar", sidecar_path, "sequence sidecar JSON")->required();
    ablate_cmd->add_option("--config", config_path, "base pipeline config JSON");
    ablate_cmd->add_option("--calib", calib_path, "noise calibration JSON");
    ablate_cmd->add_option("--grid", grid_path, "JSON array of config overrides")->required();
    ablate_cmd->add_option("--clean", clean_dir, "clean reference .ppm frames")->required();
    ablate_cmd->add_option("--report", report_path, "CSV report path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (denoise->parsed())
            return cmd_denoise(in_dir, sidecar_path, config_path, calib_path, out_dir);
        if (inject->parsed())
            return cmd_inject(in_dir, calib_path, iso, seed, out_dir, sidecar_path, phase_name, black_level);
        if (demo->parsed())
            return cmd_demosaic(in_dir, sidecar_path, out_dir);
        if (metrics->parsed())
            return cmd_metrics(in_dir, clean_dir, report_path, json_path);
        if (ablate_cmd->parsed())
            return cmd_ablate(in_dir, sidecar_path, config_path, calib_path, grid_path, clean_dir, report_path);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
