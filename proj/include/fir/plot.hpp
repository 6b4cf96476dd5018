#ifndef FIR_PLOT_HPP
#define FIR_PLOT_HPP

#include <string>
#include <vector>

#include "fir/geometry.hpp"

namespace fir::plot {

// 8-bit grayscale image, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int x, int y) const { return pixels[size_t(y) * size_t(width) + size_t(x)]; }
};

void write_png(const std::string& path, const Image& img);

// Piano-roll strips for one clip: one horizontal band per roll (ground
// truth first), instruments stacked top to bottom within a band, time on
// the horizontal axis. Active cells are black on white, bands separated
// by a gray rule.
Image render_rolls(const std::vector<Raster>& rolls, int cell_height = 8);

} // namespace fir::plot

#endif
