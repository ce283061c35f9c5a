#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rawden/color_transform.hpp"
#include "rawden/demosaic.hpp"
#include "rawden/frame_io.hpp"
#include "rawden/image.hpp"
#include "rawden/metrics.hpp"
#include "rawden/noise_model.hpp"
#include "rawden/patch_denoiser.hpp"
#include "rawden/trajectory_prefilter.hpp"

namespace rawden {

// Every tunable of the two-stage pipeline. Defaults follow the reference
// parameterization: 7x7 patches, K=66, h=1.25r, beta=0.3, stage-1 taus
// 1.9/2.2, three stage-2 scales with taus 3.0, 1.0 and 0.6/0.8.
struct PipelineConfig {
    std::optional<double> alpha;       // fixed noise return; otherwise from the ISO policy
    double beta1 = 0.3;
    double beta2 = 0.3;
    int t_back = 1;
    int t_fwd = 1;
    int r = 7;
    int k = 66;
    int m = 98;
    double h = 8.75;
    int stride = 3;
    int search_radius = 18;
    int cand_stride = 3;
    int occlusion_search_radius = 5;
    int scales = 3;
    std::vector<double> tau_stage1 = {1.9, 2.2};               // {Y, chroma}
    std::vector<std::vector<double>> tau_stage2 = {{3.0, 3.0}, {1.0, 1.0}, {0.6, 0.8}}; // finest first
    bool prefilter_stage1 = true;
    bool prefilter_stage2 = true;
    bool iterate_stage1 = true;
    bool iterate_stage2 = true;
    FlowParams flow;
    double reciprocity_limit = 0.25;
    double variance_floor = 1e-6;      // normalized units; scaled by the squared range
    uint64_t seed = 0;
    int workers = 0;                   // 0 = hardware concurrency
    int mc_trials = 1000;
    bool verbose = false;
    // (iso, alpha) anchors, PSNR winners of the alpha sweep; interpolated in log-ISO
    std::vector<std::pair<double, double>> alpha_policy = {
        {1600, 0.5}, {3200, 0.5}, {6400, 0.5}, {12800, 0.5}, {25600, 0.3}};

    void validate() const;
};

PipelineConfig config_from_json_file(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text);

// alpha for a given ISO: linear interpolation in log-ISO between the policy
// anchors, clamped at the ends. The policy must be non-increasing in ISO.
double alpha_for_iso(const PipelineConfig& config, double iso);

// out = denoised + fraction * (noisy - denoised)
Image noise_return(const Image& noisy, const Image& denoised, double fraction);

// One denoising stage for a window of untransformed frames: color transform,
// per-member trajectory prefilter, patch denoiser, partial noise return and
// a second identical denoiser pass, inverse transform.
struct StageParams {
    const ColorTransform* transform = nullptr;
    std::vector<double> channel_scales;  // raw-domain l_c
    NoiseModel model;
    bool prefilter = true;
    bool iterate = true;
    double beta = 0.3;
    bool multiscale = false;
    MultiscaleParams ms;
    std::vector<double> tau;            // per transformed channel (single scale)
    PrefilterParams pref;
    DenoiseParams den;
    int workers = 1;
};

Image denoise_stage(const std::vector<Image>& window, int ref,
                    const std::function<const FlowField&(int, int)>& flow_between,
                    const std::function<const Mask&(int, int)>& mask_between,
                    const StageParams& sp, const MpTable& table);

// Full pipeline over a CFA sequence: early ISP, packed-domain stage in YUVW,
// alpha noise return, demosaicking, RGB-domain multiscale stage in YUV with
// the alpha-scaled noise curve, finishing ISP. Outputs are in [0,1].
std::vector<RgbFrame> run_pipeline(const std::vector<CfaFrame>& frames, const Sidecar& sidecar,
                                   const NoiseModel& model, const PipelineConfig& config);

// One row of an ablation run.
struct AblationRow {
    std::string config_id;
    std::string overrides;
    double psnr = 0.0;
    double ssim = 0.0;
    double msssim = 0.0;
    double runtime_seconds = 0.0;
};

// Runs the pipeline once per grid entry (a JSON object of config overrides)
// and scores each output against the clean reference frames (16-bit peak).
std::vector<AblationRow> ablate(const std::vector<CfaFrame>& frames, const Sidecar& sidecar,
                                const NoiseModel& model, const PipelineConfig& base,
                                const std::vector<std::string>& grid_overrides,
                                const std::vector<RgbFrame>& clean_reference);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

} // namespace rawden
