#include <doctest.h>

#include <cmath>

#include "rawden/pipeline.hpp"
#include "support.hpp"

using namespace rawden;

namespace {

// small fast config for unit-level pipeline checks
PipelineConfig tiny_config()
{
    PipelineConfig c;
    c.workers = 2;
    c.mc_trials = 200;
    c.flow.min_size = 16;
    c.scales = 2;
    c.tau_stage2 = {{3.0, 3.0}, {1.0, 1.0}};
    return c;
}

std::vector<CfaFrame> synthetic_cfa_sequence(int n_frames, int size, double lo, double hi)
{
    std::vector<CfaFrame> out;
    for (int t = 0; t < n_frames; ++t) {
        const Image rgb = testsup::rgb_frame(size, size, 0.8 * t, 0.35 * t, lo, hi);
        out.push_back(testsup::mosaick(rgb, BayerPhase::RGGB));
    }
    return out;
}

} // namespace

TEST_CASE("noise_return closed forms")
{
    const Image noisy(4, 4, 1, 10.f);
    const Image denoised(4, 4, 1, 0.f);
    CHECK(testsup::max_abs_diff(noise_return(noisy, denoised, 0.0), denoised) == 0.0);
    CHECK(testsup::max_abs_diff(noise_return(noisy, denoised, 1.0), noisy) == 0.0);
    const Image mid = noise_return(noisy, denoised, 0.3);
    for (size_t i = 0; i < mid.size(); ++i)
        CHECK(mid.data()[i] == doctest::Approx(3.0));

    const Image bad(3, 3, 1, 0.f);
    CHECK_THROWS_AS(noise_return(noisy, bad, 0.5), DimensionError);
}

TEST_CASE("alpha policy: table values and log-ISO interpolation")
{
    const PipelineConfig c;
    CHECK(alpha_for_iso(c, 1600) == doctest::Approx(0.5));
    CHECK(alpha_for_iso(c, 12800) == doctest::Approx(0.5));
    CHECK(alpha_for_iso(c, 25600) == doctest::Approx(0.3));
    // halfway in log space between 12800 and 25600
    CHECK(alpha_for_iso(c, std::sqrt(12800.0 * 25600.0)) == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(alpha_for_iso(c, 100) == doctest::Approx(0.5));    // clamped low
    CHECK(alpha_for_iso(c, 100000) == doctest::Approx(0.3)); // clamped high
    CHECK_THROWS_AS(alpha_for_iso(c, -5), ParameterError);
}

TEST_CASE("config json round trip and validation")
{
    const PipelineConfig c = config_from_json_text(R"({
        "alpha": 0.4, "beta1": 0.2, "t_back": 2, "t_fwd": 2,
        "tau_stage1": {"y": 1.5, "chroma": 2.0},
        "tau_stage2": [{"y": 3.0, "chroma": 3.0}, {"y": 1.0, "chroma": 1.0}, {"y": 0.6, "chroma": 0.8}],
        "flow": {"lambda": 0.5},
        "prefilter_stage1": false
    })");
    CHECK(c.alpha.has_value());
    CHECK(*c.alpha == 0.4);
    CHECK(c.beta1 == 0.2);
    CHECK(c.t_back == 2);
    CHECK(c.tau_stage1[0] == 1.5);
    CHECK(c.flow.lambda == 0.5);
    CHECK_FALSE(c.prefilter_stage1);
    CHECK(c.prefilter_stage2);

    CHECK_THROWS_AS(config_from_json_text(R"({"alpha": 1.5})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"beta1": -0.1})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text("{nope"), ConfigError);
}

TEST_CASE("denoise_stage: zero noise model is the identity (packed domain)")
{
    // 3 identical packed frames, zero flows/masks
    const Image rgb = testsup::rgb_frame(64, 64, 0, 0, 500.0, 60000.0);
    const PackedFrame packed = pack_cfa(testsup::mosaick(rgb, BayerPhase::RGGB));
    const std::vector<Image> window = {packed, packed, packed};

    StageParams sp;
    sp.transform = &ColorTransform::yuvw();
    sp.channel_scales = {1, 1, 1, 1};
    sp.model = NoiseModel{};
    sp.tau = {1.9, 2.2, 2.2, 2.2};
    sp.pref.variance_floor = 1.0;
    sp.workers = 2;

    const FlowField zero_flow(packed.width(), packed.height());
    const Mask clear;
    auto flow_fn = [&](int, int) -> const FlowField& { return zero_flow; };
    auto mask_fn = [&](int, int) -> const Mask& { return clear; };

    MpTable table(100, 1);
    const Image out = denoise_stage(window, 1, flow_fn, mask_fn, sp, table);
    // normalized tolerance: values span ~6e4, 1e-3 normalized = 60 ADU
    CHECK(testsup::max_abs_diff(out, packed) < 6.0);
}

TEST_CASE("run_pipeline: clean sequence matches the demosaic-only path")
{
    // a=b=0 model; the pipeline must reduce to early ISP + demosaic + ISP
    const int n = 3, size = 64;
    std::vector<CfaFrame> frames = synthetic_cfa_sequence(n, size, 2000.0, 60000.0);

    Sidecar sidecar;
    sidecar.phase = BayerPhase::RGGB;
    sidecar.black_level = 0;
    sidecar.iso = 1600;

    NoiseModel model; // zero noise

    PipelineConfig cfg = tiny_config();
    cfg.alpha = 0.5;

    const std::vector<RgbFrame> out = run_pipeline(frames, sidecar, model, cfg);
    REQUIRE(out.size() == static_cast<size_t>(n));

    IspParams isp;
    isp.white_level = sidecar.white_level;
    for (int t = 0; t < n; ++t) {
        const RgbFrame direct = apply_finishing_isp(demosaic(frames[static_cast<size_t>(t)]), isp);
        // 40 dB PSNR on the [0,1] scale
        const double mse = testsup::mean_sq_diff(out[static_cast<size_t>(t)], direct);
        CHECK(10.0 * std::log10(1.0 / mse) > 40.0);
    }
}

TEST_CASE("run_pipeline: alpha=1 hands the noisy CFA to the demosaicker")
{
    // with full noise return, stage 1 is completely undone; pipeline output
    // must equal the demosaic of the noisy early-ISP CFA through the ISP
    const int size = 64;
    std::vector<CfaFrame> frames = synthetic_cfa_sequence(3, size, 2000.0, 50000.0);

    Sidecar sidecar;
    sidecar.iso = 1600;
    NoiseModel model;
    model.a = 0.02;
    model.b = 4000.0;

    // inject real noise so stage 1 has something to undo
    std::vector<CfaFrame> noisy = frames;
    for (size_t t = 0; t < noisy.size(); ++t)
        noisy[t].img = inject_noise(frames[t].img, model, 5, t);

    PipelineConfig cfg = tiny_config();
    cfg.alpha = 1.0;
    // stage-2 curve equals the full sensor curve here; disable its work via taus
    cfg.tau_stage2 = {{0.0, 0.0}, {0.0, 0.0}};
    cfg.prefilter_stage2 = false;
    cfg.iterate_stage2 = false;
    cfg.prefilter_stage1 = true;
    cfg.iterate_stage1 = true;

    const std::vector<RgbFrame> out = run_pipeline(noisy, sidecar, model, cfg);

    IspParams isp;
    for (size_t t = 0; t < noisy.size(); ++t) {
        const RgbFrame direct = apply_finishing_isp(demosaic(noisy[t]), isp);
        const double mse = testsup::mean_sq_diff(out[t], direct);
        CHECK(10.0 * std::log10(1.0 / std::max(mse, 1e-12)) > 40.0);
    }
}

TEST_CASE("run_pipeline: window never leaves the sequence bounds")
{
    // single frame: T_b and T_f clamp to zero-size neighbourhoods
    std::vector<CfaFrame> frames = synthetic_cfa_sequence(1, 64, 2000.0, 50000.0);
    Sidecar sidecar;
    sidecar.iso = 1600;
    NoiseModel model;
    model.b = 1000.0;

    PipelineConfig cfg = tiny_config();
    cfg.alpha = 0.5;
    const std::vector<RgbFrame> out = run_pipeline(frames, sidecar, model, cfg);
    CHECK(out.size() == 1);
    for (size_t i = 0; i < out[0].size(); ++i)
        CHECK(std::isfinite(out[0].data()[i]));
}

TEST_CASE("run_pipeline rejects an empty sequence")
{
    Sidecar sidecar;
    NoiseModel model;
    PipelineConfig cfg;
    CHECK_THROWS_AS(run_pipeline({}, sidecar, model, cfg), ConfigError);
}
