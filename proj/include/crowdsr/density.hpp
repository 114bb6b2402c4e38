#ifndef CROWDSR_DENSITY_HPP
#define CROWDSR_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "crowdsr/errors.hpp"
#include "crowdsr/tensor.hpp"

namespace crowdsr {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Head-center points of one image, in that image's pixel frame.
struct AnnotationSet {
  std::string image;
  Index height = 0;
  Index width = 0;
  std::vector<Point> points;

  Index count() const { return static_cast<Index>(points.size()); }
  /// Throws InputError naming the first point outside [0,width) x [0,height).
  void validate() const;
  bool operator==(const AnnotationSet&) const = default;
};

/// Scales coordinates and frame; the frame extents are rounded to integers.
/// Points landing on or past the new boundary move to boundary - 0.5.
AnnotationSet rescale_points(const AnnotationSet& ann, double factor_h, double factor_w);
/// Rescales into an exact target frame (factors new/old).
AnnotationSet rescale_to(const AnnotationSet& ann, Index new_h, Index new_w);
/// Mirror x -> width - x, under the same boundary rule as rescale_points.
AnnotationSet flip_points(const AnnotationSet& ann);

AnnotationSet read_annotation(const std::filesystem::path& file);
void write_annotation(const std::filesystem::path& file, const AnnotationSet& ann);
/// A document holding an array of annotation records.
std::vector<AnnotationSet> read_annotation_list(const std::filesystem::path& file);

template <typename Scalar = double>
using DensityGrid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DensityMap = DensityGrid<double>;

struct GaussianKernel {
  double sigma = 4.0;
  int radius = 16;
};

namespace detail {

// Normalized 1-D Gaussian over the in-frame window around `center`. The
// normalizer is summed outward from the center so that mirrored windows
// produce bit-identical weights.
template <typename Scalar>
std::vector<Scalar> gaussian_window(Index center, Index extent, Scalar sigma, int radius,
                                    Index& lo) {
  lo = std::max<Index>(0, center - radius);
  const Index hi = std::min<Index>(extent - 1, center + radius);
  auto g = [sigma](Index d) {
    const Scalar dd = static_cast<Scalar>(d);
    return std::exp(-dd * dd / (Scalar(2) * sigma * sigma));
  };
  Scalar total = g(0);
  for (int k = 1; k <= radius; ++k) {
    if (center + k <= hi) total += g(k);
    if (center - k >= lo) total += g(k);
  }
  std::vector<Scalar> w(static_cast<std::size_t>(hi - lo + 1));
  for (Index j = lo; j <= hi; ++j) w[j - lo] = g(std::abs(j - center)) / total;
  return w;
}

inline Index cell_of(double coord, Index extent) {
  return std::clamp<Index>(static_cast<Index>(std::floor(coord)), 0, extent - 1);
}

}  // namespace detail

/// Ground-truth density: one truncated, renormalized Gaussian per point, so
/// each point contributes exactly unit mass even next to the border.
template <typename Scalar = double>
DensityGrid<Scalar> generate_density_map(const AnnotationSet& ann, Index height, Index width,
                                         const GaussianKernel& kernel = {}) {
  if (!(kernel.sigma > 0.0)) throw InputError("density kernel sigma must be positive");
  if (kernel.radius < 1) throw InputError("density kernel radius must be positive");
  if (height != ann.height || width != ann.width) {
    throw ShapeError("density shape " + std::to_string(height) + "x" + std::to_string(width) +
                     " does not match annotation frame " + std::to_string(ann.height) + "x" +
                     std::to_string(ann.width));
  }
  ann.validate();
  DensityGrid<Scalar> map = DensityGrid<Scalar>::Zero(height, width);
  const Scalar sigma = static_cast<Scalar>(kernel.sigma);
  for (const Point& p : ann.points) {
    Index y0 = 0;
    Index x0 = 0;
    const auto wy = detail::gaussian_window(detail::cell_of(p.y, height), height, sigma,
                                            kernel.radius, y0);
    const auto wx = detail::gaussian_window(detail::cell_of(p.x, width), width, sigma,
                                            kernel.radius, x0);
    for (std::size_t i = 0; i < wy.size(); ++i)
      for (std::size_t j = 0; j < wx.size(); ++j) map(y0 + i, x0 + j) += wy[i] * wx[j];
  }
  return map;
}

/// Block-sum pooling by an integer factor; preserves the total.
template <typename Derived>
DensityGrid<typename Derived::Scalar> downsample_density(const Eigen::MatrixBase<Derived>& map,
                                                         Index factor) {
  if (factor < 1) throw ShapeError("downsample factor must be positive");
  if (map.rows() % factor != 0 || map.cols() % factor != 0) {
    throw ShapeError("density extents " + std::to_string(map.rows()) + "x" +
                     std::to_string(map.cols()) + " not divisible by " + std::to_string(factor));
  }
  DensityGrid<typename Derived::Scalar> out(map.rows() / factor, map.cols() / factor);
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j)
      out(i, j) = map.block(i * factor, j * factor, factor, factor).sum();
  return out;
}

/// Count represented by a density grid (compensated summation).
template <typename Derived>
typename Derived::Scalar integrate(const Eigen::DenseBase<Derived>& map) {
  using Scalar = typename Derived::Scalar;
  Scalar sum = 0;
  Scalar carry = 0;
  for (Index i = 0; i < map.rows(); ++i)
    for (Index j = 0; j < map.cols(); ++j) {
      const Scalar y = map(i, j) - carry;
      const Scalar t = sum + y;
      carry = (t - sum) - y;
      sum = t;
    }
  return sum;
}

/// Sum of a tensor's elements, compensated like integrate().
double integrate(const Tensor& density);

template <typename Derived>
Tensor density_to_tensor(const Eigen::MatrixBase<Derived>& map) {
  Tensor t({1, 1, map.rows(), map.cols()});
  t.plane(0, 0) = map.template cast<double>();
  return t;
}

}  // namespace crowdsr

#endif  // CROWDSR_DENSITY_HPP
