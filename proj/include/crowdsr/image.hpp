#ifndef CROWDSR_IMAGE_HPP
#define CROWDSR_IMAGE_HPP

#include <Eigen/Core>

#include "crowdsr/errors.hpp"
#include "crowdsr/tensor.hpp"

namespace crowdsr {

/// Raster with values in [0, 1], row-major and channel-interleaved.
template <typename Scalar = double>
struct Image {
  using PixelArray = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Index height = 0;
  Index width = 0;
  Index channels = 0;
  PixelArray pixels;

  Image() = default;
  Image(Index h, Index w, Index c, Scalar fill = Scalar(0))
      : height(h), width(w), channels(c), pixels(PixelArray::Constant(h * w * c, fill)) {
    if (h < 1 || w < 1) throw ShapeError("image extents must be positive");
    if (c != 1 && c != 3) throw ShapeError("image must have 1 or 3 channels");
  }

  Scalar& operator()(Index y, Index x, Index c) { return pixels[(y * width + x) * channels + c]; }
  Scalar operator()(Index y, Index x, Index c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

template <typename Scalar>
Image<Scalar> flip_horizontal(const Image<Scalar>& img) {
  Image<Scalar> out = img;
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x)
      for (Index c = 0; c < img.channels; ++c) out(y, img.width - 1 - x, c) = img(y, x, c);
  return out;
}

/// Gray <-> RGB conversion: gray is replicated, RGB is reduced to Rec. 601
/// luma. Returns the input unchanged when the channel count already matches.
template <typename Scalar>
Image<Scalar> with_channels(const Image<Scalar>& img, Index channels) {
  if (img.channels == channels) return img;
  Image<Scalar> out(img.height, img.width, channels);
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x) {
      if (channels == 3) {
        for (Index c = 0; c < 3; ++c) out(y, x, c) = img(y, x, 0);
      } else {
        out(y, x, 0) = Scalar(0.299) * img(y, x, 0) + Scalar(0.587) * img(y, x, 1) +
                       Scalar(0.114) * img(y, x, 2);
      }
    }
  return out;
}

/// Packs an image into a [1, C, H, W] tensor.
template <typename Scalar>
Tensor to_tensor(const Image<Scalar>& img) {
  Tensor t({1, img.channels, img.height, img.width});
  for (Index c = 0; c < img.channels; ++c)
    for (Index y = 0; y < img.height; ++y)
      for (Index x = 0; x < img.width; ++x) t.at(0, c, y, x) = static_cast<double>(img(y, x, c));
  return t;
}

}  // namespace crowdsr

#endif  // CROWDSR_IMAGE_HPP
