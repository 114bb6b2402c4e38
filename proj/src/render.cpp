#include "crowdsr/render.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace crowdsr {

namespace {

constexpr std::array<Rgb, 5> kStops{{
    {0.00, 0.00, 0.02},
    {0.34, 0.06, 0.43},
    {0.73, 0.21, 0.33},
    {0.98, 0.55, 0.04},
    {0.99, 1.00, 0.64},
}};

// 3x5 glyphs, one row per string, '#' lit.
const char* glyph(char ch) {
  switch (ch) {
    case '0': return "####.##.##.####";
    case '1': return ".#.##..#..#.###";
    case '2': return "###..#####..###";
    case '3': return "###..####..####";
    case '4': return "#.##.####..#..#";
    case '5': return "####..###..####";
    case '6': return "####..####.####";
    case '7': return "###..#..#..#..#";
    case '8': return "####.#####.####";
    case '9': return "####.####..####";
    case '.': return "............#..";
    case '-': return "......###......";
    default: return "...............";
  }
}

}  // namespace

Rgb ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(kStops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kStops.size() - 2);
  const double f = pos - static_cast<double>(i);
  Rgb c;
  for (int k = 0; k < 3; ++k) c[k] = kStops[i][k] + f * (kStops[i + 1][k] - kStops[i][k]);
  return c;
}

Image<double> render_heatmap(const DensityMap& map, Index cell_size, RenderLayout* layout) {
  if (map.rows() < 1 || map.cols() < 1) throw ShapeError("cannot render an empty density map");
  if (cell_size < 1) throw ShapeError("cell size must be positive");

  char text[64];
  std::snprintf(text, sizeof text, "%.3f", integrate(map));
  const std::string label = text;

  constexpr Index kPixel = 2;  // glyph pixel size
  constexpr Index kPad = 4;
  const Index heat_h = map.rows() * cell_size;
  const Index heat_w = map.cols() * cell_size;
  const Index text_w = static_cast<Index>(label.size()) * 4 * kPixel;
  const Index margin = 5 * kPixel + 2 * kPad;
  Image<double> img(heat_h + margin, std::max(heat_w, text_w + 2 * kPad), 3);

  const Rgb low = ramp_color(0.0);
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x)
      for (Index c = 0; c < 3; ++c) img(y, x, c) = low[c];

  const double peak = map.maxCoeff();
  for (Index i = 0; i < map.rows(); ++i)
    for (Index j = 0; j < map.cols(); ++j) {
      const Rgb col = ramp_color(peak > 0.0 ? map(i, j) / peak : 0.0);
      for (Index y = i * cell_size; y < (i + 1) * cell_size; ++y)
        for (Index x = j * cell_size; x < (j + 1) * cell_size; ++x)
          for (Index c = 0; c < 3; ++c) img(y, x, c) = col[c];
    }

  for (std::size_t k = 0; k < label.size(); ++k) {
    const char* g = glyph(label[k]);
    for (Index gy = 0; gy < 5; ++gy)
      for (Index gx = 0; gx < 3; ++gx) {
        if (g[gy * 3 + gx] != '#') continue;
        for (Index py = 0; py < kPixel; ++py)
          for (Index px = 0; px < kPixel; ++px) {
            const Index y = heat_h + kPad + gy * kPixel + py;
            const Index x = kPad + (static_cast<Index>(k) * 4 + gx) * kPixel + px;
            for (Index c = 0; c < 3; ++c) img(y, x, c) = 1.0;
          }
      }
  }

  if (layout) *layout = {heat_h, heat_w};
  return img;
}

void write_density(const std::filesystem::path& file, const DensityMap& map) {
  nlohmann::json j = {{"height", map.rows()},
                      {"width", map.cols()},
                      {"data", std::vector<double>(map.data(), map.data() + map.size())}};
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file.string());
  out << j.dump() << "\n";
}

DensityMap read_density(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open density dump " + file.string());
  try {
    const auto j = nlohmann::json::parse(in);
    const auto h = j.at("height").get<Index>();
    const auto w = j.at("width").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (h < 1 || w < 1 || static_cast<Index>(data.size()) != h * w) {
      throw InputError("density dump " + file.string() + " has inconsistent extents");
    }
    DensityMap m(h, w);
    std::copy(data.begin(), data.end(), m.data());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed density dump " + file.string() + ": " + e.what());
  }
}

}  // namespace crowdsr
