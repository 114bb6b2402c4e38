#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "crowdsr/density.hpp"
#include "crowdsr/render.hpp"

using namespace crowdsr;

TEST_CASE("ramp endpoints and clamping") {
  CHECK(ramp_color(-1.0) == ramp_color(0.0));
  CHECK(ramp_color(2.0) == ramp_color(1.0));
  const Rgb lo = ramp_color(0.0), hi = ramp_color(1.0);
  CHECK(lo[0] + lo[1] + lo[2] < hi[0] + hi[1] + hi[2]);
}

TEST_CASE("an all-zero map renders in the lowest ramp color") {
  RenderLayout layout;
  Image<double> img = render_heatmap(DensityMap::Zero(6, 9), 8, &layout);
  CHECK(layout.heat_height == 48);
  CHECK(layout.heat_width == 72);
  const Rgb lo = ramp_color(0.0);
  Index lit = 0;
  bool uniform = true;
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x) {
      const bool is_text = img(y, x, 0) == 1.0 && img(y, x, 1) == 1.0;
      if (is_text) {
        ++lit;
        uniform = uniform && y >= layout.heat_height;
        continue;
      }
      for (Index c = 0; c < 3; ++c) uniform = uniform && img(y, x, c) == lo[c];
    }
  CHECK(uniform);
  CHECK(lit > 0);  // "0.000" is printed in the margin
}

TEST_CASE("the peak cell takes the brightest color") {
  DensityMap m = DensityMap::Zero(4, 4);
  m(1, 2) = 0.5;
  m(3, 0) = 0.25;
  Image<double> img = render_heatmap(m, 2);
  const Rgb hi = ramp_color(1.0), mid = ramp_color(0.5);
  for (Index c = 0; c < 3; ++c) {
    CHECK(img(2, 4, c) == hi[c]);
    CHECK(img(7, 1, c) == doctest::Approx(mid[c]));
  }
}

TEST_CASE("density dumps round trip") {
  const auto file = std::filesystem::temp_directory_path() / "crowdsr_render_test.json";
  DensityMap m(2, 3);
  m << 0.1, 0.2, 0.3, -0.4, 1e-17, 5.0;
  write_density(file, m);
  CHECK(read_density(file) == m);
  std::filesystem::remove(file);
  CHECK_THROWS_AS(read_density(file), InputError);
  CHECK_THROWS_AS(render_heatmap(DensityMap(0, 0)), ShapeError);
}
