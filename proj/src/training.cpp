#include "crowdsr/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "crowdsr/eval.hpp"
#include "crowdsr/ops.hpp"

namespace crowdsr {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw InputError("lr must be positive");
  if (epochs < 0) throw InputError("epochs must be non-negative");
  if (!(alpha >= 0.0)) throw InputError("alpha must be non-negative");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw InputError("flip_prob must lie in [0, 1]");
  if (batch_size < 1) throw InputError("batch_size must be positive");
  if (eval_every < 0) throw InputError("eval_every must be non-negative");
  if (!(kernel.sigma > 0.0) || kernel.radius < 1) throw InputError("invalid density kernel");
}

// ---------------------------------------------------------------------------
// Losses

namespace {
double half_sum_factor(const Shape& s) {
  return static_cast<double>(s.numel()) / (2.0 * static_cast<double>(s.n));
}
}  // namespace

Var loss_density(const Var& pred, const Var& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("loss_density: prediction " + pred.shape().str() + " vs ground truth " +
                     gt.shape().str());
  }
  return scale(mse(pred, gt), half_sum_factor(pred.shape()));
}

Var loss_sr(const Var& sr, const Var& hr) {
  if (sr.shape() != hr.shape()) {
    throw ShapeError("loss_sr: SR output " + sr.shape().str() + " vs HR target " + hr.shape().str());
  }
  return scale(mse(sr, hr), half_sum_factor(sr.shape()));
}

Var total_loss(const Var& ld, const Var& le, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  return add(ld, scale(le, alpha));
}

double loss_density(const Tensor& pred, const Tensor& gt) {
  Graph g;
  return loss_density(g.constant(pred), g.constant(gt)).value().item();
}

double loss_sr(const Tensor& sr, const Tensor& hr) {
  Graph g;
  return loss_sr(g.constant(sr), g.constant(hr)).value().item();
}

Tensor ground_truth_density(const AnnotationSet& points, Index height, Index width,
                            const GaussianKernel& kernel, Index stride) {
  return density_to_tensor(downsample_density(generate_density_map(points, height, width, kernel), stride));
}

// ---------------------------------------------------------------------------
// Log records

bool EpochRecord::same_values(const EpochRecord& o) const {
  auto eq = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return epoch == o.epoch && step == o.step && eq(ld, o.ld) && eq(le, o.le) && eq(total, o.total) &&
         eq(mae_val, o.mae_val);
}

std::string to_json_line(const EpochRecord& r) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"epoch", r.epoch},     {"step", r.step},       {"ld", num(r.ld)},
              {"le", num(r.le)},      {"total", num(r.total)}, {"mae_val", num(r.mae_val)},
              {"wall_ms", r.wall_ms}}
      .dump();
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// Tensors for one sample in both orientations, built on first use.
struct PreparedSample {
  Tensor input[2];
  Tensor target[2];
  Tensor gt[2];
  bool ready[2] = {false, false};
};

Tensor stack_batch(const std::vector<const Tensor*>& parts) {
  Shape s = parts.front()->shape();
  for (const Tensor* t : parts) {
    if (t->shape().c != s.c || t->shape().h != s.h || t->shape().w != s.w) {
      throw ShapeError("batch members differ in extents: " + t->shape().str() + " vs " + s.str());
    }
  }
  const Index per = s.numel();
  s.n *= static_cast<Index>(parts.size());
  Tensor out(s);
  for (std::size_t i = 0; i < parts.size(); ++i) out.data().segment(static_cast<Index>(i) * per, per) = parts[i]->data();
  return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void check_finite(double v, std::int64_t step, const char* term) {
  if (!std::isfinite(v)) {
    throw TrainingError(step, term,
                        std::string("non-finite ") + term + " at step " + std::to_string(step));
  }
}

}  // namespace

TrainResult train(Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const bool with_sr = model.has_mssrm();
  for (const Sample& s : train_set) {
    if (s.input.height % 8 != 0 || s.input.width % 8 != 0) {
      throw ShapeError("training image '" + s.id + "' extents not divisible by 8");
    }
    if (with_sr && !s.target) throw InputError("training sample '" + s.id + "' has no SR target");
  }

  std::vector<PreparedSample> prepared(train_set.size());
  auto prepare = [&](std::size_t i, int flipped) -> const PreparedSample& {
    PreparedSample& p = prepared[i];
    if (!p.ready[flipped]) {
      const Sample& s = train_set[i];
      const Image<double> input = with_channels(s.input, model.spec.in_channels);
      p.input[flipped] = to_tensor(flipped ? flip_horizontal(input) : input);
      if (with_sr) {
        const Image<double> target = with_channels(*s.target, model.spec.sr_out_channels);
        p.target[flipped] = to_tensor(flipped ? flip_horizontal(target) : target);
      }
      p.gt[flipped] = ground_truth_density(flipped ? flip_points(s.points) : s.points,
                                           s.input.height, s.input.width, cfg.kernel);
      p.ready[flipped] = true;
    }
    return p;
  };

  TrainResult result;
  AdamOptions opts;
  opts.lr = cfg.lr;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    double sum_ld = 0.0;
    double sum_le = 0.0;
    double sum_total = 0.0;
    int steps_this_epoch = 0;

    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Tensor*> inputs;
      std::vector<const Tensor*> targets;
      std::vector<const Tensor*> gts;
      for (std::size_t k = b; k < end; ++k) {
        const int flipped = uniform01(rng) < cfg.flip_prob ? 1 : 0;
        const PreparedSample& p = prepare(order[k], flipped);
        inputs.push_back(&p.input[flipped]);
        targets.push_back(&p.target[flipped]);
        gts.push_back(&p.gt[flipped]);
      }
      ++step;

      Graph graph;
      BoundModel bound(graph, model, true);
      const BoundModel::Outputs out = bound.forward(graph.constant(stack_batch(inputs)), with_sr);
      const Var ld = loss_density(out.density, graph.constant(stack_batch(gts)));
      check_finite(ld.value().item(), step, "ld");
      Var total = ld;
      double le_value = 0.0;
      if (with_sr) {
        const Var le = loss_sr(*out.sr, graph.constant(stack_batch(targets)));
        le_value = le.value().item();
        check_finite(le_value, step, "le");
        total = total_loss(ld, le, cfg.alpha);
      }
      check_finite(total.value().item(), step, "total");

      model.params.zero_grad();
      graph.backward(total);
      adam_step(model.params, result.optimizer, opts);

      sum_ld += ld.value().item();
      sum_le += le_value;
      sum_total += total.value().item();
      ++steps_this_epoch;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = step;
    const double n = std::max(1, steps_this_epoch);
    rec.ld = sum_ld / n;
    rec.le = sum_le / n;
    rec.total = sum_total / n;
    rec.mae_val = std::nan("");
    const bool eval_now =
        cfg.eval_every > 0 && !val_set.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    if (eval_now) rec.mae_val = evaluate(model, val_set).mae;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec, model);
  }
  return result;
}

double mean_counting_loss(const Model& model, const std::vector<Sample>& samples,
                          const GaussianKernel& kernel) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const Sample& s : samples) {
    const Tensor pred =
        forward_counting(model, to_tensor(with_channels(s.input, model.spec.in_channels)));
    sum += loss_density(pred, ground_truth_density(s.points, s.input.height, s.input.width, kernel));
  }
  return sum / static_cast<double>(samples.size());
}

}  // namespace crowdsr
