#ifndef CROWDSR_DATASET_HPP
#define CROWDSR_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsr/density.hpp"
#include "crowdsr/image.hpp"
#include "crowdsr/resample.hpp"

namespace crowdsr {

struct BuildConfig {
  Index long_side = 2048;
  Index min_side_threshold = 2048;
  Interpolation method = Interpolation::linear;
  std::vector<int> scales{2, 4};
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  // Multiple the HR short side is rounded to; 0 means the largest scale.
  Index short_side_multiple = 0;

  Index effective_multiple() const;
  void validate() const;
  bool operator==(const BuildConfig&) const = default;
};

/// One resolution level of an entry. Paths are relative to the manifest.
struct ScaleRecord {
  std::string image;
  std::string annotations;
  Index height = 0;
  Index width = 0;
  Index count = 0;
  bool operator==(const ScaleRecord&) const = default;
};

struct ManifestEntry {
  std::string id;
  std::string split;  // "train" or "test"
  Index source_height = 0;
  Index source_width = 0;
  double factor_h = 1.0;  // source -> HR
  double factor_w = 1.0;
  ScaleRecord hr;
  std::map<int, ScaleRecord> lr;  // keyed by downsampling scale
  bool operator==(const ManifestEntry&) const = default;

  /// Record for scale s, where s == 1 is the HR level.
  const ScaleRecord& level(int scale) const;
};

struct DatasetManifest {
  BuildConfig config;
  std::vector<ManifestEntry> entries;  // ordered by id
  std::vector<std::string> skipped;    // sources below the size threshold
  bool operator==(const DatasetManifest&) const = default;
};

inline constexpr const char* kManifestFile = "manifest.json";

/// Builds the hierarchical-resolution dataset under `out_dir` and writes
/// `out_dir/manifest.json`. Each annotation record names an image file
/// relative to `src_dir`; every PNG in `src_dir` must have a record.
DatasetManifest build_dataset(const std::filesystem::path& src_dir,
                              const std::vector<AnnotationSet>& annotations,
                              const std::filesystem::path& out_dir, const BuildConfig& config,
                              std::ostream* log = nullptr);

/// HR extents produced from a source of the given extents.
std::pair<Index, Index> hr_extents(Index src_h, Index src_w, const BuildConfig& config);

void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& file);
std::string manifest_to_string(const DatasetManifest& manifest);

struct EntryCheck {
  std::string id;
  bool ok = true;
  std::vector<std::string> problems;
};

struct ValidationReport {
  std::vector<EntryCheck> entries;
  bool ok() const;
  std::size_t failures() const;
};

/// Checks files, extents and cross-scale count consistency per entry.
/// `root` is the directory holding the manifest.
ValidationReport validate_manifest(const DatasetManifest& manifest,
                                   const std::filesystem::path& root);

/// Network input, optional SR target and annotations of one entry.
struct Sample {
  std::string id;
  Image<double> input;
  std::optional<Image<double>> target;
  AnnotationSet points;
};

/// Loads one entry at `input_scale`. When `sr_scale` > 0 the target is the
/// level at input_scale / sr_scale (scale 1 is HR).
Sample load_sample(const ManifestEntry& entry, const std::filesystem::path& root, int input_scale,
                   int sr_scale);
/// Entries of `split` ("train", "test" or "all").
std::vector<const ManifestEntry*> select_split(const DatasetManifest& manifest,
                                               std::string_view split);

}  // namespace crowdsr

#endif  // CROWDSR_DATASET_HPP
