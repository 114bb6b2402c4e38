#ifndef CROWDSR_IMAGE_IO_HPP
#define CROWDSR_IMAGE_IO_HPP

#include <filesystem>

#include "crowdsr/image.hpp"

namespace crowdsr {

/// Reads an 8-bit PNG as grayscale or RGB (alpha is dropped), scaled to [0,1].
Image<double> read_png(const std::filesystem::path& file);
/// Quantizes to 8 bits (round to nearest) and writes a gray or RGB PNG.
void write_png(const std::filesystem::path& file, const Image<double>& img);

struct RasterInfo {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
};
/// Header-only probe of a PNG file.
RasterInfo probe_png(const std::filesystem::path& file);

}  // namespace crowdsr

#endif  // CROWDSR_IMAGE_IO_HPP
