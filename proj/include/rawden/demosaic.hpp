#pragma once

#include "rawden/image.hpp"

namespace rawden {

enum class Direction { North, South, East, West };

// Full RGB interpolation with the Hamilton-Adams stencil applied along one
// direction: green one-sided with second-difference chroma correction, then
// red/blue from interpolated color differences. Borders use symmetric
// reflection.
RgbFrame hamilton_adams_directional(const CfaFrame& cfa, Direction dir);

// Weighted average of the four directional interpolations; per-pixel weights
// fall with the chromatic variation measured along each direction.
RgbFrame demosaic(const CfaFrame& cfa);

} // namespace rawden
