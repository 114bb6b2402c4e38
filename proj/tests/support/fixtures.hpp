#ifndef CROWDSR_TESTS_FIXTURES_HPP
#define CROWDSR_TESTS_FIXTURES_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crowdsr/dataset.hpp"
#include "crowdsr/resample.hpp"
#include "crowdsr/tensor.hpp"

namespace crowdsr::testing {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (Index i = 0; i < t.numel(); ++i) t.data()[i] = u(rng);
  return t;
}

// Values at least `gap` away from zero, for kinked operators.
inline Tensor random_tensor_away_from_zero(Shape s, std::mt19937_64& rng, double gap = 1e-2) {
  Tensor t = random_tensor(s, rng);
  for (Index i = 0; i < t.numel(); ++i) {
    double& v = t.data()[i];
    if (std::abs(v) < gap) v = v < 0 ? -gap - std::abs(v) : gap + v;
  }
  return t;
}

/// Synthetic crowd: smooth background with dark Gaussian head blobs,
/// rendered at HR and downsampled by `sr_scale` for the network input.
inline Sample make_crowd_sample(std::uint64_t seed, Index lr_size = 64, int sr_scale = 2,
                                int min_heads = 3, int max_heads = 20) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_heads(min_heads, max_heads);
  const Index hr_size = lr_size * sr_scale;
  const double margin = 2.0 * sr_scale;
  std::uniform_real_distribution<double> pos(margin, static_cast<double>(hr_size) - margin);
  std::uniform_real_distribution<double> tint(0.55, 0.85);

  const int count = n_heads(rng);
  std::vector<Point> hr_points;
  for (int i = 0; i < count; ++i) hr_points.push_back({pos(rng), pos(rng)});

  const double base[3] = {tint(rng), tint(rng), tint(rng)};
  Image<double> hr(hr_size, hr_size, 3);
  const double blob_sigma = 1.2 * sr_scale;
  for (Index y = 0; y < hr_size; ++y)
    for (Index x = 0; x < hr_size; ++x) {
      const double gy = static_cast<double>(y) / static_cast<double>(hr_size);
      const double gx = static_cast<double>(x) / static_cast<double>(hr_size);
      double shade = 0.0;
      for (const Point& p : hr_points) {
        const double dy = static_cast<double>(y) + 0.5 - p.y;
        const double dx = static_cast<double>(x) + 0.5 - p.x;
        shade += std::exp(-(dx * dx + dy * dy) / (2.0 * blob_sigma * blob_sigma));
      }
      shade = std::min(shade, 1.0);
      for (Index c = 0; c < 3; ++c) {
        const double bg = base[c] * (0.85 + 0.15 * (c == 0 ? gx : gy));
        hr(y, x, c) = bg * (1.0 - 0.8 * shade) + 0.05 * shade;
      }
    }

  Sample s;
  s.id = "crowd_" + std::to_string(seed);
  s.target = hr;
  s.input = resize(hr, lr_size, lr_size, Interpolation::linear);
  AnnotationSet hr_ann{s.id, hr_size, hr_size, hr_points};
  s.points = rescale_to(hr_ann, lr_size, lr_size);
  return s;
}

inline std::vector<Sample> make_crowd_set(int n, std::uint64_t seed, Index lr_size = 64,
                                          int sr_scale = 2) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) out.push_back(make_crowd_sample(seed * 1000 + i, lr_size, sr_scale));
  return out;
}

}  // namespace crowdsr::testing

#endif  // CROWDSR_TESTS_FIXTURES_HPP
