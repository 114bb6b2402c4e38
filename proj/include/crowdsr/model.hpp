#ifndef CROWDSR_MODEL_HPP
#define CROWDSR_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsr/graph.hpp"
#include "crowdsr/tensor.hpp"

namespace crowdsr {

/// Which objective a parameter belongs to: the counting network (backbone
/// plus density head) or the detachable super-resolution head.
enum class Partition { counting, super_resolution };

std::string_view to_string(Partition p);
Partition parse_partition(std::string_view name);

/// Architecture of the counting network and its super-resolution head.
///
/// Stages 1-3 are followed by 2x2 max pooling; stages 4 and 5 are not, so
/// stage 5 features sit at stride 8.
struct ModelSpec {
  Index in_channels = 3;
  std::vector<Index> stage_widths{16, 32, 64, 64, 64};
  std::vector<Index> convs_per_stage{2, 2, 2, 2, 2};
  std::vector<int> fusion_stages{3, 4, 5};
  Index head_width = 64;
  Index sr_scale = 2;
  Index sr_out_channels = 3;

  static ModelSpec toy() { return {}; }
  static ModelSpec vgg16();

  /// Throws ShapeError describing the first violated constraint.
  void validate() const;

  static constexpr int num_stages = 5;
  static Index stage_stride(int stage);  // 1-based stage index
  Index fused_stride() const;
  /// Shuffle factor of the SR head: sr_scale times the fused-feature stride.
  Index sr_shuffle_factor() const;
  Index fused_channels() const;

  bool operator==(const ModelSpec&) const = default;
};

struct NamedTensor {
  std::string name;
  Partition partition;
  Tensor tensor;
};

/// Ordered, named collection of model weights.
class ModelParameters {
 public:
  void add(std::string name, Partition partition, Tensor tensor);

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }

  std::size_t size() const { return entries_.size(); }
  Index scalar_count() const;
  bool has_partition(Partition p) const;
  void zero_grad();

  /// Copy holding only the entries of `keep`, in original order.
  ModelParameters subset(Partition keep) const;

 private:
  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Model {
  ModelSpec spec;
  ModelParameters params;

  bool has_mssrm() const { return params.has_partition(Partition::super_resolution); }
};

struct ParameterSlot {
  std::string name;
  Partition partition;
  Shape shape;
  bool is_bias;
  bool in_backbone;
};
/// Names, partitions and shapes of every parameter `spec` defines, in order.
std::vector<ParameterSlot> parameter_layout(const ModelSpec& spec);

enum class InitScheme {
  gaussian,          // every weight ~ N(0, std^2)
  kaiming_backbone,  // backbone ~ N(0, 2 / fan_in), heads ~ N(0, std^2)
};

InitScheme parse_init_scheme(std::string_view name);
std::string_view to_string(InitScheme s);

/// Seeded weight initialization, biases zero. The kaiming_backbone scheme
/// stands in for pre-trained backbone weights when training from scratch;
/// a deep stack at std 0.01 passes almost no gradient to its early layers.
Model init_model(const ModelSpec& spec, std::uint64_t seed,
                 InitScheme scheme = InitScheme::gaussian, double weight_std = 0.01);

/// Drops the super-resolution head. Idempotent.
Model detach_mssrm(const Model& model);

/// Parameters of a model bound into one computation record.
class BoundModel {
 public:
  /// When `track_grad` is set every parameter is watched, so backward()
  /// writes into `model.params`; otherwise they are recorded as constants.
  BoundModel(Graph& graph, Model& model, bool track_grad);
  /// Binds every parameter as a constant.
  BoundModel(Graph& graph, const Model& model);

  const ModelSpec& spec() const { return *spec_; }
  Graph& graph() const { return *graph_; }
  const Var& param(std::string_view name) const;
  bool has_mssrm() const { return has_mssrm_; }

  /// Stage outputs (index 0 holds stage 1).
  std::vector<Var> backbone(const Var& image) const;
  Var counting_head(const Var& stage5) const;
  Var fuse_stages(const std::map<int, Var>& stage_features) const;
  Var sr_head(const Var& fused) const;

  Var forward_counting(const Var& image) const;
  Var forward_sr(const Var& image) const;

  struct Outputs {
    Var density;
    std::optional<Var> sr;
  };
  /// One backbone pass feeding the density head and, when `with_sr`, the
  /// super-resolution head.
  Outputs forward(const Var& image, bool with_sr) const;

 private:
  Graph* graph_;
  const ModelSpec* spec_;
  std::map<std::string, Var, std::less<>> vars_;
  bool has_mssrm_;
};

/// Density prediction [N, 1, H/8, W/8] without gradient tracking.
Tensor forward_counting(const Model& model, const Tensor& image);
/// Super-resolved image [N, C, H*sr_scale, W*sr_scale].
Tensor forward_sr(const Model& model, const Tensor& image);

}  // namespace crowdsr

#endif  // CROWDSR_MODEL_HPP
