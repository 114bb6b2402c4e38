#ifndef CROWDSR_TRAINING_HPP
#define CROWDSR_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdsr/adam.hpp"
#include "crowdsr/dataset.hpp"
#include "crowdsr/density.hpp"
#include "crowdsr/model.hpp"

namespace crowdsr {

struct TrainConfig {
  double lr = 1e-5;
  int epochs = 500;
  double alpha = 1.0;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;
  int batch_size = 1;
  GaussianKernel kernel{};
  bool shuffle = true;
  int eval_every = 1;  // epochs between held-out MAE evaluations; 0 disables

  void validate() const;
};

/// L(theta): (1 / 2N) * sum over the batch of ||pred_i - gt_i||^2.
Var loss_density(const Var& pred, const Var& gt);
/// Same squared-norm form for the super-resolved image against HR.
Var loss_sr(const Var& sr, const Var& hr);
/// ld + alpha * le.
Var total_loss(const Var& ld, const Var& le, double alpha);

double loss_density(const Tensor& pred, const Tensor& gt);
double loss_sr(const Tensor& sr, const Tensor& hr);

/// Ground truth on the counting head's grid: Gaussian density at the image
/// resolution, block-summed by the network stride.
Tensor ground_truth_density(const AnnotationSet& points, Index height, Index width,
                            const GaussianKernel& kernel, Index stride = 8);

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double ld = 0.0;       // mean counting loss over the epoch's steps
  double le = 0.0;       // mean SR loss (0 without the head)
  double total = 0.0;
  double mae_val = 0.0;  // NaN when not evaluated this epoch
  double wall_ms = 0.0;

  /// Equality ignores wall_ms.
  bool same_values(const EpochRecord& other) const;
};

std::string to_json_line(const EpochRecord& record);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::int64_t step, std::string term, const std::string& what)
      : std::runtime_error(what), step_(step), term_(std::move(term)) {}
  std::int64_t step() const { return step_; }
  const std::string& term() const { return term_; }

 private:
  std::int64_t step_;
  std::string term_;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  AdamState optimizer;
};

using EpochCallback = std::function<void(const EpochRecord&, const Model&)>;

/// Joint training of the counting loss and, while the model still carries
/// the super-resolution head, alpha times the SR loss. Deterministic for a
/// given seed. Throws TrainingError on a non-finite loss term.
TrainResult train(Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Mean counting loss over `samples` (unflipped), without gradients.
double mean_counting_loss(const Model& model, const std::vector<Sample>& samples,
                          const GaussianKernel& kernel);

}  // namespace crowdsr

#endif  // CROWDSR_TRAINING_HPP
