#pragma once

#include <string>
#include <vector>

#include "sce/metrics.hpp"

namespace sce {

// Standalone SVG line chart of selected metric columns against step.
// Columns default to the loss family plus lr.
void plot_metrics_svg(const std::string& metrics_csv, const std::string& out_svg,
                      std::vector<std::string> columns = {});

}  // namespace sce
