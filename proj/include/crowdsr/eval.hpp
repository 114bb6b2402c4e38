#ifndef CROWDSR_EVAL_HPP
#define CROWDSR_EVAL_HPP

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsr/dataset.hpp"
#include "crowdsr/model.hpp"

namespace crowdsr {

/// (1/M) sum |pred - gt|. Throws std::invalid_argument on empty or
/// mismatched inputs.
double mae(std::span<const double> pred, std::span<const double> gt);
/// sqrt((1/M) sum (pred - gt)^2).
double rmse(std::span<const double> pred, std::span<const double> gt);

struct EvalRow {
  std::string id;
  double predicted = 0.0;
  double ground_truth = 0.0;
  double abs_error = 0.0;
  bool failed = false;
  std::string error;

  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // ordered by id; failed rows are excluded from aggregates
  Index m = 0;
  double mae = 0.0;
  double rmse = 0.0;

  std::size_t failures() const;
  bool operator==(const EvalReport&) const = default;
};

/// Recomputes the aggregates from the non-failed rows.
void finalize(EvalReport& report);

/// Predicted count of one image: integral of the counting head's output.
double predict_count(const Model& model, const Image<double>& image);

EvalReport evaluate(const Model& model, const std::vector<Sample>& samples);
/// Evaluates `split` at `input_scale`; unreadable entries become failed rows.
EvalReport evaluate(const Model& model, const DatasetManifest& manifest,
                    const std::filesystem::path& root, std::string_view split, int input_scale);

std::string report_to_json(const EvalReport& report);

}  // namespace crowdsr

#endif  // CROWDSR_EVAL_HPP
