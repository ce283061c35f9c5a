#pragma once

#include <vector>

#include "rawden/image.hpp"

namespace rawden {

// Dense per-pixel displacement: position x in the source maps to x + (u,v)
// in the destination frame.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> u, v;

    FlowField() = default;
    FlowField(int w, int h) : width(w), height(h), u(static_cast<size_t>(w) * h, 0.f), v(static_cast<size_t>(w) * h, 0.f) {}
    size_t size() const { return u.size(); }
    bool empty() const { return u.empty(); }
};

struct FlowParams {
    double lambda = 0.7;       // data fidelity weight
    double theta = 0.3;        // coupling parameter
    double time_step = 0.25;   // dual ascent step
    int warps = 5;             // warps per pyramid level
    int iterations = 50;       // primal-dual iterations per warp
    double zoom = 0.5;         // pyramid downscaling factor
    int min_size = 16;         // smallest pyramid level edge
    double presmooth_sigma = 0.8;
};

// TV-L1 flow between two same-size luma planes via the standard primal-dual
// scheme on a coarse-to-fine pyramid. Deterministic for fixed iteration
// counts. Inputs smaller than the coarsest level are rejected.
FlowField tvl1_flow(const Image& src, const Image& dst, const FlowParams& params = {});

// Occludes pixels whose forward/backward flows are not reciprocal within
// `limit` pixels, plus any pixel whose target falls outside the frame.
Mask reciprocity_mask(const FlowField& fwd, const FlowField& bwd, double limit = 0.25);

// Bilinear backward warping; out-of-bounds samples clamp to the edge.
Image warp(const Image& frame, const FlowField& flow);

// Debug dump: u, v and the occlusion mask as a 3-plane float frame.
void dump_flow(const std::string& path, const FlowField& flow, const Mask& mask);

} // namespace rawden
