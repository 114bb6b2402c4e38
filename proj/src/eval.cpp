#include "crowdsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "crowdsr/density.hpp"

namespace crowdsr {

namespace {
void check_lengths(std::span<const double> pred, std::span<const double> gt) {
  if (pred.empty()) throw std::invalid_argument("metrics need at least one image");
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("prediction/ground-truth length mismatch: " +
                                std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  }
}
}  // namespace

double mae(std::span<const double> pred, std::span<const double> gt) {
  check_lengths(pred, gt);
  double s = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) s += std::abs(pred[j] - gt[j]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> gt) {
  check_lengths(pred, gt);
  double s = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - gt[j];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::size_t EvalReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const EvalRow& r) { return r.failed; }));
}

void finalize(EvalReport& report) {
  std::sort(report.rows.begin(), report.rows.end(),
            [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
  std::vector<double> pred;
  std::vector<double> gt;
  for (const EvalRow& r : report.rows) {
    if (r.failed) continue;
    pred.push_back(r.predicted);
    gt.push_back(r.ground_truth);
  }
  report.m = static_cast<Index>(pred.size());
  if (pred.empty()) {
    report.mae = report.rmse = std::nan("");
    return;
  }
  report.mae = mae(pred, gt);
  report.rmse = rmse(pred, gt);
}

double predict_count(const Model& model, const Image<double>& image) {
  return integrate(forward_counting(model, to_tensor(with_channels(image, model.spec.in_channels))));
}

EvalReport evaluate(const Model& model, const std::vector<Sample>& samples) {
  EvalReport report;
  for (const Sample& s : samples) {
    EvalRow row;
    row.id = s.id;
    row.predicted = predict_count(model, s.input);
    row.ground_truth = static_cast<double>(s.points.count());
    row.abs_error = std::abs(row.predicted - row.ground_truth);
    report.rows.push_back(std::move(row));
  }
  finalize(report);
  return report;
}

EvalReport evaluate(const Model& model, const DatasetManifest& manifest,
                    const std::filesystem::path& root, std::string_view split, int input_scale) {
  EvalReport report;
  for (const ManifestEntry* e : select_split(manifest, split)) {
    EvalRow row;
    row.id = e->id;
    try {
      const Sample s = load_sample(*e, root, input_scale, 0);
      row.ground_truth = static_cast<double>(s.points.count());
      row.predicted = predict_count(model, s.input);
      row.abs_error = std::abs(row.predicted - row.ground_truth);
    } catch (const std::exception& err) {
      row.failed = true;
      row.error = err.what();
    }
    report.rows.push_back(std::move(row));
  }
  finalize(report);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json rows = json::array();
  for (const EvalRow& r : report.rows) {
    json row = {{"id", r.id}, {"failed", r.failed}};
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row["predicted"] = r.predicted;
      row["ground_truth"] = r.ground_truth;
      row["abs_error"] = r.abs_error;
    }
    rows.push_back(std::move(row));
  }
  const json doc = {{"images", std::move(rows)},
                    {"m", report.m},
                    {"mae", num(report.mae)},
                    {"rmse", num(report.rmse)},
                    {"failures", report.failures()}};
  return doc.dump(2) + "\n";
}

}  // namespace crowdsr
