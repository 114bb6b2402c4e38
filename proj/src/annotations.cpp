#include <cmath>
#include <fstream>

#include <json.hpp>

#include "crowdsr/density.hpp"

namespace crowdsr {

using nlohmann::json;

void AnnotationSet::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    if (!(p.x >= 0.0 && p.x < static_cast<double>(width) && p.y >= 0.0 &&
          p.y < static_cast<double>(height))) {
      throw InputError("point " + std::to_string(i) + " (" + std::to_string(p.x) + ", " +
                       std::to_string(p.y) + ") lies outside the " + std::to_string(height) +
                       "x" + std::to_string(width) + " frame of '" + image + "'");
    }
  }
}

namespace {

double clamp_to_frame(double v, Index extent) {
  const double e = static_cast<double>(extent);
  return v >= e ? e - 0.5 : v;
}

AnnotationSet scale_into(const AnnotationSet& ann, Index new_h, Index new_w, double fh, double fw) {
  AnnotationSet out{ann.image, new_h, new_w, {}};
  out.points.reserve(ann.points.size());
  for (const Point& p : ann.points) {
    out.points.push_back({clamp_to_frame(p.x * fw, new_w), clamp_to_frame(p.y * fh, new_h)});
  }
  return out;
}

AnnotationSet from_json(const json& j) {
  AnnotationSet a;
  try {
    a.image = j.at("image").get<std::string>();
    a.height = j.at("height").get<Index>();
    a.width = j.at("width").get<Index>();
    for (const json& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) throw InputError("point must be an [x, y] pair");
      a.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed annotation record: ") + e.what());
  }
  return a;
}

json to_json(const AnnotationSet& a) {
  json pts = json::array();
  for (const Point& p : a.points) pts.push_back({p.x, p.y});
  return {{"image", a.image}, {"height", a.height}, {"width", a.width}, {"points", std::move(pts)}};
}

json parse_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open annotation file " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("cannot parse " + file.string() + ": " + e.what());
  }
}

}  // namespace

AnnotationSet rescale_points(const AnnotationSet& ann, double factor_h, double factor_w) {
  if (!(factor_h > 0.0 && factor_w > 0.0)) throw InputError("rescale factors must be positive");
  const auto new_h = static_cast<Index>(std::llround(static_cast<double>(ann.height) * factor_h));
  const auto new_w = static_cast<Index>(std::llround(static_cast<double>(ann.width) * factor_w));
  return scale_into(ann, new_h, new_w, factor_h, factor_w);
}

AnnotationSet rescale_to(const AnnotationSet& ann, Index new_h, Index new_w) {
  return scale_into(ann, new_h, new_w, static_cast<double>(new_h) / static_cast<double>(ann.height),
                    static_cast<double>(new_w) / static_cast<double>(ann.width));
}

AnnotationSet flip_points(const AnnotationSet& ann) {
  AnnotationSet out = ann;
  for (Point& p : out.points) p.x = clamp_to_frame(static_cast<double>(ann.width) - p.x, ann.width);
  return out;
}

AnnotationSet read_annotation(const std::filesystem::path& file) { return from_json(parse_file(file)); }

void write_annotation(const std::filesystem::path& file, const AnnotationSet& ann) {
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file.string());
  out << to_json(ann).dump(1) << "\n";
}

std::vector<AnnotationSet> read_annotation_list(const std::filesystem::path& file) {
  const json j = parse_file(file);
  if (!j.is_array()) throw InputError(file.string() + ": expected an array of annotation records");
  std::vector<AnnotationSet> out;
  for (const json& r : j) out.push_back(from_json(r));
  return out;
}

double integrate(const Tensor& density) {
  return integrate(Eigen::Map<const Eigen::VectorXd>(density.data().data(), density.numel()));
}

}  // namespace crowdsr
