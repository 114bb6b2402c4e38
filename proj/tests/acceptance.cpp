// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crowdsr/checkpoint.hpp"
#include "crowdsr/eval.hpp"
#include "crowdsr/ops.hpp"
#include "crowdsr/training.hpp"
#include "support/dataset_fixture.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/model_fixture.hpp"
#include "support/oracles.hpp"
#include "support/training_fixture.hpp"

using namespace crowdsr;
using namespace crowdsr::testing;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::string worst_op;
  std::map<std::string, int> counts;
  for (const auto& c : random_operator_cases(rng, 20)) {
    const double e = gradcheck(c.op, c.inputs, rng).rel_error;
    ++counts[c.name];
    if (e > worst) worst = e, worst_op = c.name;
  }
  const double secs = seconds_since(t0);
  bool enough = counts.size() == 12;
  for (const auto& [name, n] : counts) enough = enough && n >= 20;
  return {worst < 1e-4 && secs < 60.0 && enough,
          std::to_string(counts.size()) + " operators x 20 shapes, worst rel err " + fmt("%.2e", worst) +
              " (" + worst_op + "), " + fmt("%.1f", secs) + " s"};
}

Verdict pixel_shuffle_laws() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<Index> small(1, 4);
  int exact = 0;
  for (int t = 0; t < 100; ++t) {
    const Index r = small(rng);
    Tensor x = random_tensor({small(rng), small(rng) * r * r, small(rng), small(rng)}, rng);
    Tensor y = random_tensor({small(rng), small(rng), small(rng) * r, small(rng) * r}, rng);
    if (pixel_unshuffle(pixel_shuffle(x, r), r).data() == x.data() &&
        pixel_shuffle(pixel_unshuffle(y, r), r).data() == y.data())
      ++exact;
  }
  const Tensor in({1, 4, 1, 1}, {1.0, 2.0, 3.0, 4.0});
  const Tensor out = pixel_shuffle(in, 2);
  bool formula = out.shape() == Shape{1, 1, 2, 2};
  for (Index dy = 0; dy < 2 && formula; ++dy)
    for (Index dx = 0; dx < 2; ++dx) formula = formula && out.at(0, 0, dy, dx) == in.at(0, dy * 2 + dx, 0, 0);
  return {exact == 100 && formula,
          std::to_string(exact) + "/100 exact round trips, ordering case " + (formula ? "ok" : "wrong")};
}

Verdict plug_out_equivalence() {
  std::mt19937_64 rng(103);
  int identical = 0;
  bool partitions_ok = true;
  for (int t = 0; t < 25; ++t) {
    const ModelSpec spec = random_spec(rng);
    const Model m = init_model(spec, rng(), InitScheme::gaussian, 0.3);
    const Index h = 8 * (1 + static_cast<Index>(rng() % 4)), w = 8 * (1 + static_cast<Index>(rng() % 4));
    const Tensor x = random_tensor({1 + static_cast<Index>(rng() % 2), spec.in_channels, h, w}, rng, 0, 1);
    const Model d = detach_mssrm(m);
    if (forward_counting(m, x).data() == forward_counting(d, x).data()) ++identical;

    const Model reloaded = deserialize_checkpoint(serialize_checkpoint(d));
    std::set<std::string> kept, expected;
    for (const NamedTensor& e : reloaded.params.entries()) kept.insert(e.name);
    for (const NamedTensor& e : m.params.entries())
      if (e.partition == Partition::counting) expected.insert(e.name);
    partitions_ok = partitions_ok && kept == expected && m.has_mssrm() && !reloaded.has_mssrm();
  }
  return {identical == 25 && partitions_ok,
          std::to_string(identical) + "/25 bit-identical, detached checkpoint drops exactly the SR partition: " +
              (partitions_ok ? "yes" : "no")};
}

Verdict count_conservation() {
  std::mt19937_64 rng(104);
  std::uniform_int_distribution<Index> blocks(1, 10);
  std::uniform_int_distribution<int> npts(0, 80);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_count = 0.0, worst_sum = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index h = 8 * blocks(rng), w = 8 * blocks(rng);
    AnnotationSet a{"a", h, w, {}};
    const int n = npts(rng);
    const bool border = t % 2 == 1;
    for (int i = 0; i < n; ++i) {
      Point p{u(rng) * static_cast<double>(w), u(rng) * static_cast<double>(h)};
      if (border) {
        // Snap to one of the four edges, within a pixel of it.
        switch (i % 4) {
          case 0: p.x = u(rng); break;
          case 1: p.x = static_cast<double>(w) - 1e-3 - 0.99 * u(rng); break;
          case 2: p.y = u(rng); break;
          default: p.y = static_cast<double>(h) - 1e-3 - 0.99 * u(rng); break;
        }
      }
      a.points.push_back(p);
    }
    const GaussianKernel k{1.0 + 5.0 * u(rng), 4 + static_cast<int>(rng() % 20)};
    const DensityMap map = generate_density_map(a, h, w, k);
    worst_count = std::max(worst_count, std::abs(integrate(map) - static_cast<double>(n)));
    for (Index f : {1, 2, 4, 8})
      worst_sum = std::max(worst_sum, std::abs(integrate(downsample_density(map, f)) - integrate(map)));
  }
  return {worst_count < 1e-6 && worst_sum < 1e-12,
          "200 sets (100 border-heavy): worst count error " + fmt("%.2e", worst_count) +
              ", worst downsample drift " + fmt("%.2e", worst_sum)};
}

Verdict dataset_builder() {
  const fs::path src = scratch_dir("accept_src");
  const auto anns = write_sources(src, three_image_specs(), 105);
  const BuildConfig cfg = small_build_config();
  const fs::path a = scratch_dir("accept_a"), b = scratch_dir("accept_b");
  const DatasetManifest m = build_dataset(src, anns, a, cfg);
  build_dataset(src, anns, b, cfg);
  const bool deterministic = slurp(a / kManifestFile) == slurp(b / kManifestFile);

  bool counts = m.entries.size() == 3;
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    for (int s : {1, 2, 4})
      counts = counts && read_annotation(a / m.entries[i].level(s).annotations).count() == anns[i].count();
  const bool fresh_ok = validate_manifest(m, a).ok();

  fs::remove(b / m.entries[0].lr.at(4).image);
  const ValidationReport missing = validate_manifest(m, b);
  const fs::path edited = a / m.entries[1].lr.at(2).annotations;
  AnnotationSet ann = read_annotation(edited);
  ann.points.pop_back();
  write_annotation(edited, ann);
  const ValidationReport dropped = validate_manifest(m, a);
  auto flags = [](const ValidationReport& r, const std::string& id, const std::string& text) {
    if (r.failures() != 1) return false;
    for (const EntryCheck& c : r.entries)
      if (c.id == id)
        for (const std::string& p : c.problems)
          if (p.find(text) != std::string::npos) return true;
    return false;
  };
  const bool caught_missing = flags(missing, m.entries[0].id, "missing file");
  const bool caught_drop = flags(dropped, m.entries[1].id, "count mismatch");
  return {deterministic && counts && fresh_ok && caught_missing && caught_drop,
          std::string("byte-identical manifest: ") + (deterministic ? "yes" : "no") +
              ", counts invariant: " + (counts ? "yes" : "no") + ", missing file caught: " +
              (caught_missing ? "yes" : "no") + ", dropped point caught: " + (caught_drop ? "yes" : "no")};
}

Verdict overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto set = make_crowd_set(8, 7);
  double mean_gt = 0.0;
  for (const Sample& s : set) mean_gt += static_cast<double>(s.points.count());
  mean_gt /= static_cast<double>(set.size());

  bool pass = true;
  std::string detail;
  for (double alpha : {0.0, 1.0}) {
    Model m = init_model(ModelSpec::toy(), 42, InitScheme::kaiming_backbone);
    TrainConfig cfg;
    cfg.lr = 3e-4;
    cfg.epochs = 250;  // 8 images, batch 1: 2000 steps
    cfg.alpha = alpha;
    cfg.flip_prob = 0.0;
    cfg.seed = 1;
    cfg.eval_every = 0;
    const double initial = mean_counting_loss(m, set, cfg.kernel);
    const TrainResult r = train(m, set, {}, cfg);
    const double final_loss = mean_counting_loss(m, set, cfg.kernel);
    const double mae_pct = 100.0 * evaluate(m, set).mae / mean_gt;
    const double ratio_pct = 100.0 * final_loss / initial;
    const bool ok = r.log.back().step <= 2000 && ratio_pct < 1.0 && mae_pct < 5.0;
    pass = pass && ok;
    detail += "alpha=" + fmt("%g", alpha) + ": loss " + fmt("%.3f%%", ratio_pct) + " of initial, MAE " +
              fmt("%.2f%%", mae_pct) + " of mean count; ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 600.0;
  return {pass, detail + fmt("%.0f s", secs)};
}

Verdict alpha_zero_reduction() {
  const auto set = make_crowd_set(4, 8);
  Model attached = init_model(ModelSpec::toy(), 11, InitScheme::kaiming_backbone);
  Model counting_only = detach_mssrm(attached);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 25;  // 100 steps
  cfg.alpha = 0.0;
  cfg.seed = 12;
  cfg.eval_every = 0;
  const TrainResult ra = train(attached, set, {}, cfg);
  const TrainResult rc = train(counting_only, set, {}, cfg);
  bool same_log = ra.log.size() == rc.log.size();
  for (std::size_t i = 0; same_log && i < ra.log.size(); ++i) same_log = ra.log[i].ld == rc.log[i].ld;
  const bool same = same_theta_values(attached.params, counting_only.params);
  return {same && same_log && ra.log.back().step == 100,
          std::to_string(ra.log.back().step) + " steps, parameters bit-identical: " + (same ? "yes" : "no") +
              ", counting loss log identical: " + (same_log ? "yes" : "no")};
}

Verdict metric_oracle() {
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  double worst = 0.0;
  bool jensen = true;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(static_cast<std::size_t>(len(rng))), g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = u(rng), g[i] = u(rng);
    const double a = mae(p, g), r = rmse(p, g);
    worst = std::max({worst, std::abs(a - naive_mae(p, g)), std::abs(r - naive_rmse(p, g))});
    jensen = jensen && a <= r;
  }
  const std::vector<double> p{10, 20}, g{12, 16};
  const bool hand = mae(p, g) == 3.0 && std::abs(rmse(p, g) - std::sqrt(10.0)) < 1e-15;
  return {worst < 1e-12 && jensen && hand,
          "1000 vectors, worst deviation " + fmt("%.2e", worst) + ", MAE<=RMSE: " + (jensen ? "yes" : "no") +
              ", [10,20] vs [12,16]: " + (hand ? "3.0 / sqrt(10)" : "wrong")};
}

Verdict resampling() {
  std::mt19937_64 rng(107);
  std::uniform_int_distribution<Index> ext(1, 48);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool constant = true;
  for (Interpolation m : {Interpolation::linear, Interpolation::cubic, Interpolation::lanczos4})
    for (int t = 0; t < 30; ++t) {
      const double v = u(rng);
      const Image<double> img(ext(rng), ext(rng), t % 2 ? 3 : 1, v);
      constant = constant && (resize(img, ext(rng), ext(rng), m).pixels == v).all();
    }
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    Image<double> img(ext(rng), ext(rng), t % 2 ? 3 : 1);
    for (auto& p : img.pixels) p = u(rng);
    const Index oh = ext(rng), ow = ext(rng);
    worst = std::max(worst, (resize(img, oh, ow, Interpolation::linear).pixels -
                             tent_resize_oracle(img, oh, ow).pixels)
                                .abs()
                                .maxCoeff());
  }
  return {constant && worst < 1e-12, std::string("constant fixed point exact: ") + (constant ? "yes" : "no") +
                                         ", linear vs oracle on 50 sizes: " + fmt("%.2e", worst)};
}

Verdict sr_loss_wiring() {
  int ok = 0;
  for (int t = 0; t < 5; ++t) {
    const Sample s = make_crowd_sample(200 + static_cast<std::uint64_t>(t));
    const Model m = init_model(ModelSpec::toy(), 300 + static_cast<std::uint64_t>(t),
                               t % 2 ? InitScheme::kaiming_backbone : InitScheme::gaussian);
    const Tensor x = to_tensor(s.input);
    const Tensor gt = ground_truth_density(s.points, s.input.height, s.input.width, {});
    const Tensor self = forward_sr(m, x);
    const StepGradients with = step_gradients(m, x, gt, self, 1.0);
    const StepGradients without = step_gradients(m, x, gt, self, 0.0);
    if (with.le == 0.0 && same_theta_gradients(with.grads, without.grads)) ++ok;
  }
  return {ok == 5, std::to_string(ok) + "/5 models: le = 0 and counting gradients equal the alpha = 0 case"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"pixel-shuffle laws", pixel_shuffle_laws},
      {"plug-out equivalence", plug_out_equivalence},
      {"count conservation", count_conservation},
      {"dataset builder", dataset_builder},
      {"overfit run", overfit},
      {"alpha-zero reduction", alpha_zero_reduction},
      {"metric oracle", metric_oracle},
      {"resampling", resampling},
      {"SR-loss wiring", sr_loss_wiring},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("[%s] %2zu. %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
