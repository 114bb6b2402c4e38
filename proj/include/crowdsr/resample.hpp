#ifndef CROWDSR_RESAMPLE_HPP
#define CROWDSR_RESAMPLE_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsr/errors.hpp"
#include "crowdsr/image.hpp"

namespace crowdsr {

enum class Interpolation { linear, cubic, lanczos4 };

inline Interpolation parse_interpolation(std::string_view name) {
  if (name == "linear") return Interpolation::linear;
  if (name == "cubic") return Interpolation::cubic;
  if (name == "lanczos4") return Interpolation::lanczos4;
  throw InputError("unknown interpolation method '" + std::string(name) +
                   "' (expected linear, cubic or lanczos4)");
}

inline std::string_view to_string(Interpolation m) {
  switch (m) {
    case Interpolation::linear: return "linear";
    case Interpolation::cubic: return "cubic";
    case Interpolation::lanczos4: return "lanczos4";
  }
  return "?";
}

namespace kernel {

template <typename Scalar>
Scalar tent(Scalar d) {
  d = std::abs(d);
  return d < Scalar(1) ? Scalar(1) - d : Scalar(0);
}

// Keys cubic with a = -0.75.
template <typename Scalar>
Scalar cubic(Scalar d) {
  constexpr Scalar a = Scalar(-0.75);
  d = std::abs(d);
  if (d <= Scalar(1)) return ((a + 2) * d - (a + 3)) * d * d + 1;
  if (d < Scalar(2)) return ((a * d - 5 * a) * d + 8 * a) * d - 4 * a;
  return Scalar(0);
}

template <typename Scalar>
Scalar lanczos4(Scalar d) {
  constexpr Scalar support = Scalar(4);
  d = std::abs(d);
  if (d == Scalar(0)) return Scalar(1);
  if (d >= support) return Scalar(0);
  const Scalar pd = std::numbers::pi_v<Scalar> * d;
  return support * std::sin(pd) * std::sin(pd / support) / (pd * pd);
}

}  // namespace kernel

/// Source taps contributing to one output sample along one axis.
template <typename Scalar>
struct Taps {
  Index ref = 0;  // tap the weighted differences are taken against
  std::vector<Index> index;
  std::vector<Scalar> weight;
};

/// Per-output-sample taps for resampling an axis of length `in` to `out`,
/// using half-pixel centers, clamped edge indices and weights normalized to
/// unit sum.
template <typename Scalar>
std::vector<Taps<Scalar>> compute_taps(Index in, Index out, Interpolation method) {
  if (in < 1 || out < 1) throw ShapeError("resample extents must be positive");
  int lo = 0;
  int count = 2;
  if (method == Interpolation::cubic) {
    lo = -1;
    count = 4;
  } else if (method == Interpolation::lanczos4) {
    lo = -3;
    count = 8;
  }

  const Scalar scale = static_cast<Scalar>(in) / static_cast<Scalar>(out);
  std::vector<Taps<Scalar>> taps(out);
  for (Index i = 0; i < out; ++i) {
    const Scalar src = (static_cast<Scalar>(i) + Scalar(0.5)) * scale - Scalar(0.5);
    const Scalar base = std::floor(src);
    const Scalar frac = src - base;
    const Index j0 = static_cast<Index>(base);
    Taps<Scalar>& t = taps[i];
    t.ref = std::clamp<Index>(j0, 0, in - 1);
    if (frac == Scalar(0)) {
      t.index.push_back(t.ref);
      t.weight.push_back(Scalar(1));
      continue;
    }
    Scalar total = 0;
    for (int k = 0; k < count; ++k) {
      const Index j = j0 + lo + k;
      const Scalar d = src - static_cast<Scalar>(j);
      Scalar w = 0;
      switch (method) {
        case Interpolation::linear: w = kernel::tent(d); break;
        case Interpolation::cubic: w = kernel::cubic(d); break;
        case Interpolation::lanczos4: w = kernel::lanczos4(d); break;
      }
      t.index.push_back(std::clamp<Index>(j, 0, in - 1));
      t.weight.push_back(w);
      total += w;
    }
    for (Scalar& w : t.weight) w /= total;
  }
  return taps;
}

namespace detail {

// Resamples along one axis. `stride` is the element step between
// consecutive samples on that axis; `lines` enumerates the other axis.
template <typename Scalar>
void resample_axis(const Scalar* src, Scalar* dst, const std::vector<Taps<Scalar>>& taps,
                   Index lines, Index src_line_step, Index dst_line_step, Index stride,
                   Index channels) {
  for (Index l = 0; l < lines; ++l) {
    const Scalar* s = src + l * src_line_step;
    Scalar* d = dst + l * dst_line_step;
    for (std::size_t i = 0; i < taps.size(); ++i) {
      const Taps<Scalar>& t = taps[i];
      for (Index c = 0; c < channels; ++c) {
        const Scalar ref = s[t.ref * stride + c];
        Scalar acc = 0;
        for (std::size_t k = 0; k < t.index.size(); ++k) {
          acc += t.weight[k] * (s[t.index[k] * stride + c] - ref);
        }
        d[static_cast<Index>(i) * stride + c] = ref + acc;
      }
    }
  }
}

}  // namespace detail

/// Separable resize: rows first, then columns. The output is clamped to
/// [0, 1]. Downscaling point-samples the kernel without an area prefilter.
template <typename Scalar>
Image<Scalar> resize(const Image<Scalar>& img, Index out_h, Index out_w, Interpolation method) {
  if (out_h < 1 || out_w < 1) throw ShapeError("resize target extents must be positive");
  const Index ch = img.channels;

  // Vertical pass: img.height -> out_h, width unchanged.
  Image<Scalar> tmp(out_h, img.width, ch);
  const auto vtaps = compute_taps<Scalar>(img.height, out_h, method);
  detail::resample_axis(img.pixels.data(), tmp.pixels.data(), vtaps, img.width, ch, ch,
                        img.width * ch, ch);

  Image<Scalar> out(out_h, out_w, ch);
  const auto htaps = compute_taps<Scalar>(img.width, out_w, method);
  detail::resample_axis(tmp.pixels.data(), out.pixels.data(), htaps, out_h, img.width * ch,
                        out_w * ch, ch, ch);

  out.pixels = out.pixels.max(Scalar(0)).min(Scalar(1));
  return out;
}

/// Dense (out x in) matrix form of compute_taps, for linear operators.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> interpolation_matrix(Index in, Index out,
                                                                           Interpolation method) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(out, in);
  const auto taps = compute_taps<Scalar>(in, out, method);
  for (Index i = 0; i < out; ++i)
    for (std::size_t k = 0; k < taps[i].index.size(); ++k) m(i, taps[i].index[k]) += taps[i].weight[k];
  return m;
}

}  // namespace crowdsr

#endif  // CROWDSR_RESAMPLE_HPP
