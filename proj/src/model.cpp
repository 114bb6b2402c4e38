#include "crowdsr/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "crowdsr/errors.hpp"
#include "crowdsr/ops.hpp"

namespace crowdsr {

std::string_view to_string(Partition p) {
  return p == Partition::counting ? "counting" : "super_resolution";
}

Partition parse_partition(std::string_view name) {
  if (name == "counting") return Partition::counting;
  if (name == "super_resolution") return Partition::super_resolution;
  throw InputError("unknown parameter partition '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelSpec

ModelSpec ModelSpec::vgg16() {
  ModelSpec s;
  s.stage_widths = {64, 128, 256, 512, 512};
  s.convs_per_stage = {2, 2, 3, 3, 3};
  s.head_width = 64;
  return s;
}

void ModelSpec::validate() const {
  if (in_channels != 1 && in_channels != 3) throw ShapeError("in_channels must be 1 or 3");
  if (stage_widths.size() != num_stages) throw ShapeError("stage_widths must list 5 stages");
  if (convs_per_stage.size() != num_stages) throw ShapeError("convs_per_stage must list 5 stages");
  for (int s = 0; s < num_stages; ++s) {
    if (stage_widths[s] < 1) throw ShapeError("stage widths must be positive");
    if (convs_per_stage[s] < 1) throw ShapeError("each stage needs at least one convolution");
  }
  if (fusion_stages.empty()) throw ShapeError("fusion_stages must be non-empty");
  std::set<int> seen;
  for (int s : fusion_stages) {
    if (s < 1 || s > num_stages) throw ShapeError("fusion stage " + std::to_string(s) + " outside 1..5");
    if (!seen.insert(s).second) throw ShapeError("fusion stage " + std::to_string(s) + " repeated");
  }
  if (head_width < 1) throw ShapeError("head_width must be positive");
  if (sr_scale < 1) throw ShapeError("sr_scale must be positive");
  if (sr_out_channels < 1) throw ShapeError("sr_out_channels must be positive");
}

Index ModelSpec::stage_stride(int stage) {
  static constexpr Index strides[] = {1, 2, 4, 8, 8};
  return strides[stage - 1];
}

Index ModelSpec::fused_stride() const {
  return stage_stride(*std::min_element(fusion_stages.begin(), fusion_stages.end()));
}

Index ModelSpec::sr_shuffle_factor() const { return sr_scale * fused_stride(); }

Index ModelSpec::fused_channels() const {
  Index c = 0;
  for (int s : fusion_stages) c += stage_widths[s - 1];
  return c;
}

// ---------------------------------------------------------------------------
// ModelParameters

void ModelParameters::add(std::string name, Partition partition, Tensor tensor) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), partition, std::move(tensor)});
}

Tensor& ModelParameters::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return entries_[it->second].tensor;
}

const Tensor& ModelParameters::at(std::string_view name) const {
  return const_cast<ModelParameters*>(this)->at(name);
}

bool ModelParameters::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Index ModelParameters::scalar_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

bool ModelParameters::has_partition(Partition p) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [p](const NamedTensor& e) { return e.partition == p; });
}

void ModelParameters::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

ModelParameters ModelParameters::subset(Partition keep) const {
  ModelParameters out;
  for (const auto& e : entries_)
    if (e.partition == keep) out.add(e.name, e.partition, e.tensor);
  return out;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

std::string conv_name(int stage, int conv) {
  return "backbone.stage" + std::to_string(stage) + ".conv" + std::to_string(conv);
}

constexpr const char* kHead3 = "head.conv3x3";
constexpr const char* kHead1 = "head.conv1x1";
constexpr const char* kSrConv = "mssrm.conv";

}  // namespace

std::vector<ParameterSlot> parameter_layout(const ModelSpec& spec) {
  spec.validate();
  std::vector<ParameterSlot> slots;
  auto add_conv = [&](const std::string& name, Partition p, Index c_out, Index c_in, Index k) {
    const bool bb = name.starts_with("backbone.");
    slots.push_back({name + ".weight", p, {c_out, c_in, k, k}, false, bb});
    slots.push_back({name + ".bias", p, {c_out, 1, 1, 1}, true, bb});
  };
  Index c_in = spec.in_channels;
  for (int s = 1; s <= ModelSpec::num_stages; ++s) {
    for (int c = 1; c <= spec.convs_per_stage[s - 1]; ++c) {
      add_conv(conv_name(s, c), Partition::counting, spec.stage_widths[s - 1], c_in, 3);
      c_in = spec.stage_widths[s - 1];
    }
  }
  add_conv(kHead3, Partition::counting, spec.head_width, spec.stage_widths.back(), 3);
  add_conv(kHead1, Partition::counting, 1, spec.head_width, 1);
  const Index r = spec.sr_shuffle_factor();
  add_conv(kSrConv, Partition::super_resolution, spec.sr_out_channels * r * r,
           spec.fused_channels(), 3);
  return slots;
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "gaussian") return InitScheme::gaussian;
  if (name == "kaiming_backbone") return InitScheme::kaiming_backbone;
  throw InputError("unknown init scheme '" + std::string(name) +
                   "' (expected gaussian or kaiming_backbone)");
}

std::string_view to_string(InitScheme s) {
  return s == InitScheme::gaussian ? "gaussian" : "kaiming_backbone";
}

Model init_model(const ModelSpec& spec, std::uint64_t seed, InitScheme scheme, double weight_std) {
  if (!(weight_std > 0.0)) throw InputError("init std must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Model model{spec, {}};
  for (const ParameterSlot& slot : parameter_layout(spec)) {
    Tensor t(slot.shape);
    if (!slot.is_bias) {
      double std = weight_std;
      if (scheme == InitScheme::kaiming_backbone && slot.in_backbone) {
        std = std::sqrt(2.0 / static_cast<double>(slot.shape.c * slot.shape.h * slot.shape.w));
      }
      for (Index i = 0; i < t.numel(); ++i) t.data()[i] = std * normal(rng);
    }
    model.params.add(slot.name, slot.partition, std::move(t));
  }
  return model;
}

Model detach_mssrm(const Model& model) {
  return Model{model.spec, model.params.subset(Partition::counting)};
}

// ---------------------------------------------------------------------------
// Forward passes

BoundModel::BoundModel(Graph& graph, Model& model, bool track_grad)
    : graph_(&graph), spec_(&model.spec), has_mssrm_(model.has_mssrm()) {
  for (NamedTensor& e : model.params.entries()) {
    vars_.emplace(e.name, track_grad ? graph.watch(e.tensor) : graph.constant(e.tensor));
  }
}

BoundModel::BoundModel(Graph& graph, const Model& model)
    : graph_(&graph), spec_(&model.spec), has_mssrm_(model.has_mssrm()) {
  for (const NamedTensor& e : model.params.entries()) vars_.emplace(e.name, graph.constant(e.tensor));
}

const Var& BoundModel::param(std::string_view name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw StateError("model has no parameter '" + std::string(name) + "'");
  return it->second;
}

std::vector<Var> BoundModel::backbone(const Var& image) const {
  const Shape& s = image.shape();
  if (s.c != spec_->in_channels) {
    throw ShapeError("input has " + std::to_string(s.c) + " channels, model expects " +
                     std::to_string(spec_->in_channels));
  }
  if (s.h % 8 != 0 || s.w % 8 != 0) {
    throw ShapeError("input extents " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " must be divisible by 8");
  }
  std::vector<Var> stages;
  Var x = image;
  for (int st = 1; st <= ModelSpec::num_stages; ++st) {
    for (int c = 1; c <= spec_->convs_per_stage[st - 1]; ++c) {
      const std::string name = conv_name(st, c);
      x = relu(conv2d(x, param(name + ".weight"), param(name + ".bias"), 1, 1));
    }
    stages.push_back(x);
    if (st <= 3) x = max_pool2d(x, 2, 2);
  }
  return stages;
}

Var BoundModel::counting_head(const Var& stage5) const {
  const std::string h3 = kHead3;
  const std::string h1 = kHead1;
  Var x = relu(conv2d(stage5, param(h3 + ".weight"), param(h3 + ".bias"), 1, 1));
  return conv2d(x, param(h1 + ".weight"), param(h1 + ".bias"), 1, 0);
}

Var BoundModel::fuse_stages(const std::map<int, Var>& stage_features) const {
  std::vector<int> order = spec_->fusion_stages;
  std::sort(order.begin(), order.end());
  std::vector<Var> parts;
  Index h = 0;
  Index w = 0;
  for (int st : order) {
    auto it = stage_features.find(st);
    if (it == stage_features.end()) {
      throw ShapeError("fuse_stages: configured stage " + std::to_string(st) + " is missing");
    }
    Var f = it->second;
    if (parts.empty()) {
      h = f.shape().h;
      w = f.shape().w;
    } else if (f.shape().h != h || f.shape().w != w) {
      f = bilinear_resize(f, h, w);
    }
    parts.push_back(f);
  }
  return parts.size() == 1 ? parts.front() : concat_channels(parts);
}

Var BoundModel::sr_head(const Var& fused) const {
  if (!has_mssrm_) throw StateError("super-resolution head detached");
  const std::string n = kSrConv;
  Var x = conv2d(fused, param(n + ".weight"), param(n + ".bias"), 1, 1);
  return pixel_shuffle(x, spec_->sr_shuffle_factor());
}

BoundModel::Outputs BoundModel::forward(const Var& image, bool with_sr) const {
  if (with_sr && !has_mssrm_) throw StateError("super-resolution head detached");
  const std::vector<Var> stages = backbone(image);
  Outputs out;
  if (with_sr) {
    std::map<int, Var> features;
    for (int st : spec_->fusion_stages) features.emplace(st, stages[st - 1]);
    out.sr = sr_head(fuse_stages(features));
  }
  out.density = counting_head(stages.back());
  return out;
}

Var BoundModel::forward_counting(const Var& image) const { return forward(image, false).density; }

Var BoundModel::forward_sr(const Var& image) const { return *forward(image, true).sr; }

Tensor forward_counting(const Model& model, const Tensor& image) {
  Graph g;
  BoundModel bound(g, model);
  return bound.forward_counting(g.constant(image)).value();
}

Tensor forward_sr(const Model& model, const Tensor& image) {
  Graph g;
  BoundModel bound(g, model);
  return bound.forward_sr(g.constant(image)).value();
}

}  // namespace crowdsr
