#pragma once

#include <string>
#include <vector>

#include "yoularen/train.hpp"

namespace yoularen::plot {

/// Curves of one configuration (typically one per seed).
struct Series {
    std::string label;
    std::vector<std::vector<train::CurvePoint>> curves;
};

/// Per-epoch band of a series, used for drawing and exposed for checking.
struct Band {
    std::vector<double> epoch, mean, lo, hi;
};

Band band_of(const Series& s);

/// Normalized test cost against epoch: mean line and min/max band per series, dashed
/// reference lines at 1 (base controller) and 0 (optimal controller). A series with a
/// single epoch is drawn as a marker.
std::string render_svg(const std::vector<Series>& series, const std::string& title = "");

}  // namespace yoularen::plot
