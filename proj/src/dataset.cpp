#include "crowdsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

#include "crowdsr/image_io.hpp"

namespace crowdsr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

Index BuildConfig::effective_multiple() const {
  if (short_side_multiple > 0) return short_side_multiple;
  return scales.empty() ? 1 : *std::max_element(scales.begin(), scales.end());
}

void BuildConfig::validate() const {
  if (scales.empty()) throw InputError("at least one downsampling scale is required");
  std::set<int> seen;
  for (int s : scales) {
    if (s < 2) throw InputError("downsampling scales must be >= 2");
    if (!seen.insert(s).second) throw InputError("duplicate scale " + std::to_string(s));
  }
  const Index m = effective_multiple();
  for (int s : scales) {
    if (m % s != 0) {
      throw InputError("short-side multiple " + std::to_string(m) + " is not divisible by scale " +
                       std::to_string(s));
    }
  }
  if (long_side < 1 || long_side % m != 0) {
    throw InputError("long side " + std::to_string(long_side) + " must be a positive multiple of " +
                     std::to_string(m));
  }
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw InputError("test fraction must lie in [0, 1]");
  }
}

std::pair<Index, Index> hr_extents(Index src_h, Index src_w, const BuildConfig& config) {
  const Index m = config.effective_multiple();
  auto short_side = [&](Index shorter, Index longer) {
    const double target = static_cast<double>(shorter) * static_cast<double>(config.long_side) /
                          static_cast<double>(longer);
    return std::max<Index>(m, m * static_cast<Index>(std::llround(target / static_cast<double>(m))));
  };
  if (src_h >= src_w) return {config.long_side, short_side(src_w, src_h)};
  return {short_side(src_h, src_w), config.long_side};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json to_json(const ScaleRecord& r) {
  return {{"image", r.image}, {"annotations", r.annotations}, {"height", r.height},
          {"width", r.width}, {"count", r.count}};
}

ScaleRecord scale_from_json(const json& j) {
  return {j.at("image").get<std::string>(), j.at("annotations").get<std::string>(),
          j.at("height").get<Index>(), j.at("width").get<Index>(), j.at("count").get<Index>()};
}

json to_json(const BuildConfig& c) {
  return {{"long_side", c.long_side},
          {"min_side_threshold", c.min_side_threshold},
          {"method", std::string(to_string(c.method))},
          {"scales", c.scales},
          {"test_fraction", c.test_fraction},
          {"seed", c.seed},
          {"short_side_multiple", c.short_side_multiple}};
}

BuildConfig config_from_json(const json& j) {
  BuildConfig c;
  c.long_side = j.at("long_side").get<Index>();
  c.min_side_threshold = j.at("min_side_threshold").get<Index>();
  c.method = parse_interpolation(j.at("method").get<std::string>());
  c.scales = j.at("scales").get<std::vector<int>>();
  c.test_fraction = j.at("test_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.short_side_multiple = j.value("short_side_multiple", Index{0});
  return c;
}

json to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const ManifestEntry& e : m.entries) {
    json lr = json::object();
    for (const auto& [s, r] : e.lr) lr[std::to_string(s)] = to_json(r);
    entries.push_back({{"id", e.id},
                       {"split", e.split},
                       {"source", {{"height", e.source_height}, {"width", e.source_width}}},
                       {"scale_adjust", {{"factor_h", e.factor_h}, {"factor_w", e.factor_w}}},
                       {"hr", to_json(e.hr)},
                       {"lr", std::move(lr)}});
  }
  return {{"config", to_json(m.config)}, {"entries", std::move(entries)}, {"skipped", m.skipped}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.config = config_from_json(j.at("config"));
  for (const json& e : j.at("entries")) {
    ManifestEntry me;
    me.id = e.at("id").get<std::string>();
    me.split = e.at("split").get<std::string>();
    me.source_height = e.at("source").at("height").get<Index>();
    me.source_width = e.at("source").at("width").get<Index>();
    me.factor_h = e.at("scale_adjust").at("factor_h").get<double>();
    me.factor_w = e.at("scale_adjust").at("factor_w").get<double>();
    me.hr = scale_from_json(e.at("hr"));
    for (const auto& [k, v] : e.at("lr").items()) me.lr.emplace(std::stoi(k), scale_from_json(v));
    m.entries.push_back(std::move(me));
  }
  m.skipped = j.value("skipped", std::vector<std::string>{});
  return m;
}

std::string level_dir(int scale) { return scale == 1 ? "hr" : "lr_x" + std::to_string(scale); }

}  // namespace

const ScaleRecord& ManifestEntry::level(int scale) const {
  if (scale == 1) return hr;
  auto it = lr.find(scale);
  if (it == lr.end()) {
    throw InputError("entry '" + id + "' has no level at scale " + std::to_string(scale));
  }
  return it->second;
}

std::string manifest_to_string(const DatasetManifest& manifest) {
  return to_json(manifest).dump(2) + "\n";
}

void save_manifest(const fs::path& file, const DatasetManifest& manifest) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write manifest " + file.string());
  out << manifest_to_string(manifest);
  if (!out) throw InputError("cannot write manifest " + file.string());
}

DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open manifest " + file.string());
  try {
    return manifest_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw InputError("malformed manifest " + file.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Build

DatasetManifest build_dataset(const fs::path& src_dir, const std::vector<AnnotationSet>& annotations,
                              const fs::path& out_dir, const BuildConfig& config, std::ostream* log) {
  config.validate();

  std::map<std::string, const AnnotationSet*> by_id;
  for (const AnnotationSet& a : annotations) {
    const std::string id = fs::path(a.image).stem().string();
    if (!by_id.emplace(id, &a).second) throw InputError("duplicate annotation record for '" + id + "'");
    if (!fs::exists(src_dir / a.image)) {
      throw InputError("annotated image " + (src_dir / a.image).string() + " does not exist");
    }
  }
  if (fs::is_directory(src_dir)) {
    for (const auto& f : fs::directory_iterator(src_dir)) {
      if (f.path().extension() != ".png") continue;
      if (!by_id.contains(f.path().stem().string())) {
        throw InputError("missing annotation for " + f.path().string());
      }
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir / "annotations", ec);
  for (int s : config.scales) fs::create_directories(out_dir / level_dir(s), ec);
  fs::create_directories(out_dir / level_dir(1), ec);
  if (ec) throw InputError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.config = config;

  for (const auto& [id, ann] : by_id) {
    const Image<double> src = read_png(src_dir / ann->image);
    if (ann->height != src.height || ann->width != src.width) {
      throw InputError("annotation frame of '" + id + "' does not match its image extents");
    }
    ann->validate();
    if (std::max(src.height, src.width) < config.min_side_threshold) {
      manifest.skipped.push_back(id);
      if (log) {
        *log << "skipping " << id << ": " << src.height << "x" << src.width << " below threshold "
             << config.min_side_threshold << "\n";
      }
      continue;
    }

    ManifestEntry entry;
    entry.id = id;
    entry.source_height = src.height;
    entry.source_width = src.width;
    const auto [hh, hw] = hr_extents(src.height, src.width, config);
    entry.factor_h = static_cast<double>(hh) / static_cast<double>(src.height);
    entry.factor_w = static_cast<double>(hw) / static_cast<double>(src.width);

    auto emit = [&](int scale, const Image<double>& img, const AnnotationSet& pts) {
      ScaleRecord r;
      r.image = level_dir(scale) + "/" + id + ".png";
      r.annotations = "annotations/" + id + "_x" + std::to_string(scale) + ".json";
      r.height = img.height;
      r.width = img.width;
      r.count = pts.count();
      write_png(out_dir / r.image, img);
      AnnotationSet stored = pts;
      stored.image = r.image;
      write_annotation(out_dir / r.annotations, stored);
      return r;
    };

    const Image<double> hr = resize(src, hh, hw, config.method);
    const AnnotationSet hr_pts = rescale_to(*ann, hh, hw);
    entry.hr = emit(1, hr, hr_pts);
    for (int s : config.scales) {
      const Index lh = hh / s;
      const Index lw = hw / s;
      entry.lr.emplace(s, emit(s, resize(hr, lh, lw, config.method), rescale_to(hr_pts, lh, lw)));
    }
    manifest.entries.push_back(std::move(entry));
  }

  // Seeded split: Fisher-Yates over id-ordered entries, first n_test go to test.
  const std::size_t n = manifest.entries.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(config.seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_test = static_cast<std::size_t>(std::llround(config.test_fraction * static_cast<double>(n)));
  for (std::size_t k = 0; k < n; ++k) manifest.entries[order[k]].split = k < n_test ? "test" : "train";

  save_manifest(out_dir / kManifestFile, manifest);
  return manifest;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const { return failures() == 0; }

std::size_t ValidationReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const EntryCheck& e) { return !e.ok; }));
}

ValidationReport validate_manifest(const DatasetManifest& manifest, const fs::path& root) {
  ValidationReport report;
  const Index m = manifest.config.effective_multiple();
  for (const ManifestEntry& e : manifest.entries) {
    EntryCheck check{e.id, true, {}};
    auto fail = [&](std::string msg) {
      check.ok = false;
      check.problems.push_back(std::move(msg));
    };

    std::vector<std::pair<int, const ScaleRecord*>> levels{{1, &e.hr}};
    for (const auto& [s, r] : e.lr) levels.emplace_back(s, &r);

    if (e.hr.height % m != 0 || e.hr.width % m != 0) {
      fail("HR extents " + std::to_string(e.hr.height) + "x" + std::to_string(e.hr.width) +
           " not divisible by " + std::to_string(m));
    }
    for (int s : manifest.config.scales) {
      if (!e.lr.contains(s)) fail("missing level for scale " + std::to_string(s));
    }

    std::optional<Index> count;
    for (const auto& [s, r] : levels) {
      const std::string tag = "scale " + std::to_string(s);
      if (r->height * s != e.hr.height || r->width * s != e.hr.width) {
        fail(tag + ": extents " + std::to_string(r->height) + "x" + std::to_string(r->width) +
             " are not HR / " + std::to_string(s));
      }
      if (!fs::exists(root / r->image)) {
        fail("missing file: " + r->image);
      } else {
        try {
          const RasterInfo info = probe_png(root / r->image);
          if (info.height != r->height || info.width != r->width) {
            fail(tag + ": image is " + std::to_string(info.height) + "x" +
                 std::to_string(info.width) + ", manifest records " + std::to_string(r->height) +
                 "x" + std::to_string(r->width));
          }
        } catch (const InputError& err) {
          fail(err.what());
        }
      }
      if (!fs::exists(root / r->annotations)) {
        fail("missing file: " + r->annotations);
        continue;
      }
      try {
        const AnnotationSet a = read_annotation(root / r->annotations);
        if (a.height != r->height || a.width != r->width) fail(tag + ": annotation frame mismatch");
        a.validate();
        if (a.count() != r->count) {
          fail("count mismatch at " + tag + ": file has " + std::to_string(a.count()) +
               ", manifest records " + std::to_string(r->count));
        }
        if (!count) {
          count = a.count();
        } else if (*count != a.count()) {
          fail("count mismatch across scales: " + tag + " has " + std::to_string(a.count()) +
               ", HR has " + std::to_string(*count));
        }
      } catch (const InputError& err) {
        fail(err.what());
      }
    }
    report.entries.push_back(std::move(check));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Loading

Sample load_sample(const ManifestEntry& entry, const fs::path& root, int input_scale, int sr_scale) {
  Sample s;
  s.id = entry.id;
  const ScaleRecord& in = entry.level(input_scale);
  s.input = read_png(root / in.image);
  s.points = read_annotation(root / in.annotations);
  if (sr_scale > 0) {
    if (input_scale % sr_scale != 0) {
      throw InputError("input scale " + std::to_string(input_scale) +
                       " is not a multiple of the SR scale " + std::to_string(sr_scale));
    }
    s.target = read_png(root / entry.level(input_scale / sr_scale).image);
  }
  return s;
}

std::vector<const ManifestEntry*> select_split(const DatasetManifest& manifest, std::string_view split) {
  if (split != "train" && split != "test" && split != "all") {
    throw InputError("unknown split '" + std::string(split) + "' (expected train, test or all)");
  }
  std::vector<const ManifestEntry*> out;
  for (const ManifestEntry& e : manifest.entries)
    if (split == "all" || e.split == split) out.push_back(&e);
  return out;
}

}  // namespace crowdsr
