#include "rawden/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rawden/parallel.hpp"

namespace rawden {

void PipelineConfig::validate() const
{
    if (alpha && (*alpha < 0.0 || *alpha > 1.0))
        throw ConfigError("alpha must be in [0,1]");
    if (beta1 < 0 || beta1 > 1 || beta2 < 0 || beta2 > 1)
        throw ConfigError("beta1/beta2 must be in [0,1]");
    if (t_back < 0 || t_fwd < 0)
        throw ConfigError("window radii must be non-negative");
    if (r < 2 || stride < 1 || k < 1 || m < 1)
        throw ConfigError("invalid patch parameters");
    if (scales < 1 || static_cast<int>(tau_stage2.size()) < scales)
        throw ConfigError("tau_stage2 needs one row per scale");
    if (tau_stage1.size() != 2)
        throw ConfigError("tau_stage1 must hold {Y, chroma}");
    for (size_t i = 1; i < alpha_policy.size(); ++i) {
        if (alpha_policy[i].first <= alpha_policy[i - 1].first)
            throw ConfigError("alpha policy ISOs must increase");
        if (alpha_policy[i].second > alpha_policy[i - 1].second)
            throw ConfigError("alpha policy must be non-increasing in ISO");
    }
}

namespace {

PipelineConfig config_from_json(const nlohmann::json& j)
{
    PipelineConfig c;
    try {
        if (j.contains("alpha") && !j["alpha"].is_null())
            c.alpha = j["alpha"].get<double>();
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.t_back = j.value("t_back", c.t_back);
        c.t_fwd = j.value("t_fwd", c.t_fwd);
        c.r = j.value("r", c.r);
        c.k = j.value("k", c.k);
        c.m = j.value("m", c.m);
        c.h = j.value("h", 1.25 * c.r);
        c.stride = j.value("stride", c.stride);
        c.search_radius = j.value("search_radius", c.search_radius);
        c.cand_stride = j.value("cand_stride", c.cand_stride);
        c.occlusion_search_radius = j.value("occlusion_search_radius", c.occlusion_search_radius);
        c.scales = j.value("scales", c.scales);
        if (j.contains("tau_stage1")) {
            c.tau_stage1 = {j["tau_stage1"].at("y").get<double>(), j["tau_stage1"].at("chroma").get<double>()};
        }
        if (j.contains("tau_stage2")) {
            c.tau_stage2.clear();
            for (const auto& row : j["tau_stage2"])
                c.tau_stage2.push_back({row.at("y").get<double>(), row.at("chroma").get<double>()});
        }
        c.prefilter_stage1 = j.value("prefilter_stage1", c.prefilter_stage1);
        c.prefilter_stage2 = j.value("prefilter_stage2", c.prefilter_stage2);
        c.iterate_stage1 = j.value("iterate_stage1", c.iterate_stage1);
        c.iterate_stage2 = j.value("iterate_stage2", c.iterate_stage2);
        if (j.contains("flow")) {
            const auto& f = j["flow"];
            c.flow.lambda = f.value("lambda", c.flow.lambda);
            c.flow.theta = f.value("theta", c.flow.theta);
            c.flow.time_step = f.value("time_step", c.flow.time_step);
            c.flow.warps = f.value("warps", c.flow.warps);
            c.flow.iterations = f.value("iterations", c.flow.iterations);
            c.flow.zoom = f.value("zoom", c.flow.zoom);
            c.flow.min_size = f.value("min_size", c.flow.min_size);
        }
        c.reciprocity_limit = j.value("reciprocity_limit", c.reciprocity_limit);
        c.variance_floor = j.value("variance_floor", c.variance_floor);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        c.mc_trials = j.value("mc_trials", c.mc_trials);
        c.verbose = j.value("verbose", c.verbose);
        if (j.contains("alpha_policy")) {
            c.alpha_policy.clear();
            for (const auto& row : j["alpha_policy"])
                c.alpha_policy.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

} // namespace

PipelineConfig config_from_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

PipelineConfig config_from_json_text(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

double alpha_for_iso(const PipelineConfig& config, double iso)
{
    if (iso <= 0)
        throw ParameterError("alpha_for_iso: iso must be positive");
    const auto& policy = config.alpha_policy;
    if (policy.empty())
        throw ConfigError("alpha policy is empty");
    if (iso <= policy.front().first)
        return policy.front().second;
    if (iso >= policy.back().first)
        return policy.back().second;
    for (size_t i = 1; i < policy.size(); ++i) {
        if (iso <= policy[i].first) {
            const double t = (std::log(iso) - std::log(policy[i - 1].first)) /
                             (std::log(policy[i].first) - std::log(policy[i - 1].first));
            return policy[i - 1].second + t * (policy[i].second - policy[i - 1].second);
        }
    }
    return policy.back().second;
}

Image noise_return(const Image& noisy, const Image& denoised, double fraction)
{
    if (!noisy.same_shape(denoised))
        throw DimensionError("noise_return: frame shapes differ");
    Image out(noisy.width(), noisy.height(), noisy.channels());
    const float f = static_cast<float>(fraction);
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = denoised.data()[i] + f * (noisy.data()[i] - denoised.data()[i]);
    return out;
}

Image denoise_stage(const std::vector<Image>& window, int ref,
                    const std::function<const FlowField&(int, int)>& flow_between,
                    const std::function<const Mask&(int, int)>& mask_between,
                    const StageParams& sp, const MpTable& table)
{
    const int n = static_cast<int>(window.size());
    const ColorTransform& t = *sp.transform;

    std::vector<Image> transformed(window.size());
    for (int i = 0; i < n; ++i)
        transformed[static_cast<size_t>(i)] = t.apply(window[static_cast<size_t>(i)]);

    auto flows_for = [&](int member) {
        std::vector<FlowField> flows(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j)
            if (j != member)
                flows[static_cast<size_t>(j)] = flow_between(member, j);
        return flows;
    };
    auto masks_for = [&](int member) {
        std::vector<Mask> masks(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j)
            if (j != member)
                masks[static_cast<size_t>(j)] = mask_between(member, j);
        return masks;
    };

    auto noise_for = [&](int member) {
        TransformedNoise tn;
        tn.raw_ref = &window[static_cast<size_t>(member)];
        tn.model = sp.model;
        tn.channel_scales = sp.channel_scales;
        tn.matrix = t.matrix();
        tn.out_channels = t.size();
        tn.in_channels = t.size();
        return tn;
    };

    // trajectory prefiltering of every window member
    std::vector<Image> filtered = transformed;
    if (sp.prefilter) {
        for (int i = 0; i < n; ++i)
            filtered[static_cast<size_t>(i)] = prefilter_frame(
                transformed, i, flows_for(i), masks_for(i), noise_for(i), sp.pref, table, sp.workers);
    }

    const std::vector<FlowField> ref_flows = flows_for(ref);
    const std::vector<Mask> ref_masks = masks_for(ref);
    const TransformedNoise ref_noise = noise_for(ref);

    auto run_denoiser = [&](const std::vector<Image>& win) {
        if (sp.multiscale)
            return multiscale_denoise(win, ref, ref_flows, ref_masks, ref_noise, sp.ms, sp.den, sp.workers);
        return denoise_frame(win, ref, ref_flows, ref_masks, ref_noise, sp.tau, sp.den, sp.workers);
    };

    Image first_pass = run_denoiser(filtered);
    if (!sp.iterate)
        return t.apply_inverse(first_pass);

    // partial noise return against the denoiser's input, then a second
    // identical application
    Image returned = noise_return(filtered[static_cast<size_t>(ref)], first_pass, sp.beta);
    std::vector<Image> second_window = filtered;
    second_window[static_cast<size_t>(ref)] = std::move(returned);
    Image second_pass = run_denoiser(second_window);
    return t.apply_inverse(second_pass);
}

namespace {

// flows and reciprocity masks between ordered frame pairs, computed once
class FlowCache {
public:
    FlowCache(std::vector<Image> lumas, const FlowParams& params, double limit, int workers)
        : lumas_(std::move(lumas)), params_(params), limit_(limit), workers_(workers)
    {
    }

    void ensure_window(int lo, int hi)
    {
        std::vector<std::pair<int, int>> missing;
        for (int a = lo; a <= hi; ++a)
            for (int b = lo; b <= hi; ++b)
                if (a != b && !flows_.count({a, b}))
                    missing.emplace_back(a, b);
        if (missing.empty())
            return;
        std::vector<FlowField> computed(missing.size());
        parallel_chunks(static_cast<int>(missing.size()), workers_, [&](int i) {
            const auto [a, b] = missing[static_cast<size_t>(i)];
            computed[static_cast<size_t>(i)] =
                tvl1_flow(lumas_[static_cast<size_t>(a)], lumas_[static_cast<size_t>(b)], params_);
        });
        for (size_t i = 0; i < missing.size(); ++i)
            flows_.emplace(missing[i], std::move(computed[i]));
        for (const auto& key : missing)
            if (!masks_.count(key)) {
                const FlowField& fwd = flows_.at(key);
                const FlowField& bwd = flows_.at({key.second, key.first});
                masks_.emplace(key, reciprocity_mask(fwd, bwd, limit_));
            }
    }

    const FlowField& flow(int a, int b) const { return flows_.at({a, b}); }
    const Mask& mask(int a, int b) const { return masks_.at({a, b}); }

private:
    std::vector<Image> lumas_;
    FlowParams params_;
    double limit_;
    int workers_;
    std::map<std::pair<int, int>, FlowField> flows_;
    std::map<std::pair<int, int>, Mask> masks_;
};

// one full stage pass over the sequence, windowed per frame
std::vector<Image> run_stage_sequence(const std::vector<Image>& frames, const ColorTransform& transform,
                                      const StageParams& base, const PipelineConfig& cfg,
                                      const MpTable& table, const char* label)
{
    const int n = static_cast<int>(frames.size());

    std::vector<Image> lumas(frames.size());
    for (int i = 0; i < n; ++i)
        lumas[static_cast<size_t>(i)] = transform.luma(frames[static_cast<size_t>(i)]);
    FlowCache cache(std::move(lumas), cfg.flow, cfg.reciprocity_limit, base.workers);

    std::vector<Image> out(frames.size());
    for (int t = 0; t < n; ++t) {
        const int lo = std::max(0, t - cfg.t_back);
        const int hi = std::min(n - 1, t + cfg.t_fwd);
        cache.ensure_window(lo, hi);

        std::vector<Image> window;
        window.reserve(static_cast<size_t>(hi - lo + 1));
        for (int i = lo; i <= hi; ++i)
            window.push_back(frames[static_cast<size_t>(i)]);

        auto flow_between = [&](int a, int b) -> const FlowField& { return cache.flow(lo + a, lo + b); };
        auto mask_between = [&](int a, int b) -> const Mask& { return cache.mask(lo + a, lo + b); };

        out[static_cast<size_t>(t)] =
            denoise_stage(window, t - lo, flow_between, mask_between, base, table);
        if (cfg.verbose)
            std::fprintf(stderr, "  %s frame %d/%d done\n", label, t + 1, n);
    }
    return out;
}

} // namespace

std::vector<RgbFrame> run_pipeline(const std::vector<CfaFrame>& frames, const Sidecar& sidecar,
                                   const NoiseModel& model, const PipelineConfig& config)
{
    if (frames.empty())
        throw ConfigError("run_pipeline: empty sequence");
    config.validate();

    const int workers = resolve_workers(config.workers);
    const double alpha = config.alpha ? *config.alpha : alpha_for_iso(config, sidecar.iso);

    IspParams isp;
    isp.black_level = sidecar.black_level;
    isp.wb_gains = sidecar.wb_gains;
    isp.ccm = sidecar.ccm;
    isp.gamma = sidecar.gamma;
    isp.white_level = sidecar.white_level;

    const double norm = isp.normalization();
    const double floor_abs = config.variance_floor * norm * norm;

    MpTable table(config.mc_trials);

    PrefilterParams pref;
    pref.r = config.r;
    pref.stride = config.stride;
    pref.h = config.h;
    pref.occlusion_search_radius = config.occlusion_search_radius;
    pref.mc_trials = config.mc_trials;
    pref.variance_floor = floor_abs;

    DenoiseParams den;
    den.r = config.r;
    den.stride = config.stride;
    den.k_volumes = config.k;
    den.m_patches = config.m;
    den.search_radius = config.search_radius;
    den.cand_stride = config.cand_stride;

    // early ISP and packing
    std::vector<Image> packed;
    packed.reserve(frames.size());
    for (const CfaFrame& f : frames)
        packed.push_back(pack_cfa(apply_early_isp(f, isp)));

    // stage 1: packed CFA in YUVW
    StageParams s1;
    s1.transform = &ColorTransform::yuvw();
    s1.channel_scales = {sidecar.wb_gains[0], sidecar.wb_gains[1], sidecar.wb_gains[2], sidecar.wb_gains[3]};
    s1.model = model;
    s1.prefilter = config.prefilter_stage1;
    s1.iterate = config.iterate_stage1;
    s1.beta = config.beta1;
    s1.multiscale = false;
    s1.tau = {config.tau_stage1[0], config.tau_stage1[1], config.tau_stage1[1], config.tau_stage1[1]};
    s1.pref = pref;
    s1.den = den;
    s1.workers = workers;

    if (config.verbose)
        std::fprintf(stderr, "stage 1 (packed, alpha=%.2f)\n", alpha);
    std::vector<Image> stage1 = run_stage_sequence(packed, ColorTransform::yuvw(), s1, config, table, "stage1");

    // alpha noise return in the packed domain, then demosaicking
    std::vector<RgbFrame> rgb;
    rgb.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        const Image returned = noise_return(packed[i], stage1[i], alpha);
        rgb.push_back(demosaic(unpack_cfa(returned, frames[i].phase)));
    }

    // stage 2: demosaicked RGB in YUV with the alpha-scaled curve
    const std::array<double, 3> g3 = isp.rgb_gains();
    StageParams s2;
    s2.transform = &ColorTransform::yuv();
    s2.channel_scales = {g3[0], g3[1], g3[2]};
    s2.model = stage2_noise_curve(model, alpha);
    s2.prefilter = config.prefilter_stage2;
    s2.iterate = config.iterate_stage2;
    s2.beta = config.beta2;
    s2.multiscale = true;
    s2.ms.scales = config.scales;
    for (int s = 0; s < config.scales; ++s)
        s2.ms.tau.push_back({config.tau_stage2[static_cast<size_t>(s)][0],
                             config.tau_stage2[static_cast<size_t>(s)][1],
                             config.tau_stage2[static_cast<size_t>(s)][1]});
    s2.pref = pref;
    s2.den = den;
    s2.workers = workers;

    if (config.verbose)
        std::fprintf(stderr, "stage 2 (demosaicked)\n");
    std::vector<Image> stage2 = run_stage_sequence(rgb, ColorTransform::yuv(), s2, config, table, "stage2");

    // finishing ISP
    std::vector<RgbFrame> out;
    out.reserve(stage2.size());
    for (const Image& f : stage2)
        out.push_back(apply_finishing_isp(f, isp));
    return out;
}

std::vector<AblationRow> ablate(const std::vector<CfaFrame>& frames, const Sidecar& sidecar,
                                const NoiseModel& model, const PipelineConfig& base,
                                const std::vector<std::string>& grid_overrides,
                                const std::vector<RgbFrame>& clean_reference)
{
    if (clean_reference.size() != frames.size())
        throw ConfigError("ablate: clean reference count must match sequence length");

    // base config as JSON so overrides can be merged field-by-field
    nlohmann::json base_json;
    {
        base_json["beta1"] = base.beta1;
        base_json["beta2"] = base.beta2;
        base_json["t_back"] = base.t_back;
        base_json["t_fwd"] = base.t_fwd;
        base_json["r"] = base.r;
        base_json["k"] = base.k;
        base_json["m"] = base.m;
        base_json["h"] = base.h;
        base_json["stride"] = base.stride;
        base_json["search_radius"] = base.search_radius;
        base_json["cand_stride"] = base.cand_stride;
        base_json["scales"] = base.scales;
        base_json["prefilter_stage1"] = base.prefilter_stage1;
        base_json["prefilter_stage2"] = base.prefilter_stage2;
        base_json["iterate_stage1"] = base.iterate_stage1;
        base_json["iterate_stage2"] = base.iterate_stage2;
        base_json["workers"] = base.workers;
        base_json["mc_trials"] = base.mc_trials;
        base_json["verbose"] = base.verbose;
        if (base.alpha)
            base_json["alpha"] = *base.alpha;
    }

    std::vector<AblationRow> rows;
    int id = 0;
    for (const std::string& over_text : grid_overrides) {
        nlohmann::json merged = base_json;
        nlohmann::json over;
        try {
            over = nlohmann::json::parse(over_text);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("ablate: bad grid entry: ") + e.what());
        }
        merged.merge_patch(over);
        const PipelineConfig cfg = config_from_json_text(merged.dump());

        const auto tic = std::chrono::steady_clock::now();
        const std::vector<RgbFrame> result = run_pipeline(frames, sidecar, model, cfg);
        const auto toc = std::chrono::steady_clock::now();

        // metrics on 16-bit scaled sRGB
        std::vector<Image> scaled;
        scaled.reserve(result.size());
        for (const Image& f : result) {
            Image s(f.width(), f.height(), f.channels());
            for (size_t i = 0; i < f.size(); ++i)
                s.data()[i] = f.data()[i] * 65535.f;
            scaled.push_back(std::move(s));
        }
        const MetricReport report = score_sequence(scaled, clean_reference, 65535.0);

        AblationRow row;
        row.config_id = "cfg" + std::to_string(id++);
        row.overrides = over.dump();
        row.psnr = report.mean_psnr;
        row.ssim = report.mean_ssim;
        row.msssim = report.mean_msssim;
        row.runtime_seconds = std::chrono::duration<double>(toc - tic).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << "config_id,overrides,psnr,ssim,msssim,runtime_seconds\n";
    for (const AblationRow& r : rows)
        out << r.config_id << ",\"" << r.overrides << "\"," << r.psnr << "," << r.ssim << ","
            << r.msssim << "," << r.runtime_seconds << "\n";
}

} // namespace rawden
