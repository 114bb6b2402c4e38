#include "crowdsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace crowdsr {

namespace {

struct PngReader {
  png_image img;
  explicit PngReader(const std::filesystem::path& file) {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, file.c_str())) {
      const std::string msg = img.message;
      png_image_free(&img);
      throw InputError("cannot read image " + file.string() + ": " + msg);
    }
  }
  ~PngReader() { png_image_free(&img); }
  bool color() const { return (img.format & PNG_FORMAT_FLAG_COLOR) != 0; }
};

}  // namespace

RasterInfo probe_png(const std::filesystem::path& file) {
  PngReader r(file);
  return {static_cast<Index>(r.img.height), static_cast<Index>(r.img.width), r.color() ? 3 : 1};
}

Image<double> read_png(const std::filesystem::path& file) {
  PngReader r(file);
  const Index channels = r.color() ? 3 : 1;
  r.img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(r.img));
  if (!png_image_finish_read(&r.img, nullptr, buf.data(), 0, nullptr)) {
    throw InputError("cannot decode image " + file.string() + ": " + r.img.message);
  }
  Image<double> out(r.img.height, r.img.width, channels);
  for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[static_cast<Index>(i)] = buf[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& file, const Image<double>& img) {
  std::vector<png_byte> buf(static_cast<std::size_t>(img.pixels.size()));
  for (Index i = 0; i < img.pixels.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    buf[static_cast<std::size_t>(i)] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  png_image out;
  std::memset(&out, 0, sizeof out);
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width);
  out.height = static_cast<png_uint_32>(img.height);
  out.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&out, file.c_str(), 0, buf.data(), 0, nullptr)) {
    const std::string msg = out.message;
    png_image_free(&out);
    throw InputError("cannot write image " + file.string() + ": " + msg);
  }
  png_image_free(&out);
}

}  // namespace crowdsr
