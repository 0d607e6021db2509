#pragma once

#include <string>
#include <vector>

namespace nowcast {

// Minimal raster output: zlib-backed PNG writer plus a small line-chart
// renderer for the per-threshold CSI/lead-time curves.
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<unsigned char>& rgb);

// ys indexed by x = 1..n; NaN entries break the polyline (undefined strata).
void write_line_chart_png(const std::string& path, const std::vector<double>& ys, double y_min,
                          double y_max, const std::string& caption);

}  // namespace nowcast
