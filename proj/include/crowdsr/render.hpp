#ifndef CROWDSR_RENDER_HPP
#define CROWDSR_RENDER_HPP

#include <array>
#include <filesystem>
#include <string>

#include "crowdsr/density.hpp"
#include "crowdsr/image.hpp"

namespace crowdsr {

using Rgb = std::array<double, 3>;

/// Fixed dark-to-bright color ramp; t is clamped to [0, 1].
Rgb ramp_color(double t);

struct RenderLayout {
  Index heat_height = 0;  // rows of the heatmap area; the count margin follows
  Index heat_width = 0;
};

/// Maps density linearly onto the ramp (0 -> lowest color, max cell ->
/// highest), each cell drawn as a cell_size square, with the integrated
/// count printed in a bottom margin.
Image<double> render_heatmap(const DensityMap& map, Index cell_size = 8,
                             RenderLayout* layout = nullptr);

/// Density grid stored as {"height", "width", "data": [row-major values]}.
void write_density(const std::filesystem::path& file, const DensityMap& map);
DensityMap read_density(const std::filesystem::path& file);

}  // namespace crowdsr

#endif  // CROWDSR_RENDER_HPP
