#ifndef CROWDSR_GRAPH_HPP
#define CROWDSR_GRAPH_HPP

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "crowdsr/tensor.hpp"

namespace crowdsr {

class Graph;

/// Handle to a value recorded in a Graph.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const;
  int id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Gradient routine of one recorded operation. `in_grads[i]` is null when
/// input i does not need a gradient.
using BackwardFn =
    std::function<void(const Eigen::VectorXd& out_grad, std::span<Eigen::VectorXd*> in_grads)>;

/// Computation record for reverse-mode differentiation.
///
/// Operations are appended in execution order, so the op list is already a
/// topological order and backward replays it in reverse. Values live in a
/// deque so references handed out by Var::value() stay valid while the
/// record grows. A Graph is confined to a single thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Enrolls `t` as a differentiable leaf; backward() accumulates into t's
  /// gradient buffer. `t` must outlive the graph.
  Var watch(Tensor& t);
  /// Records a leaf that never receives gradients.
  Var constant(Tensor t);

  /// Appends an operation output. When no input requires a gradient the
  /// backward routine is dropped and the result is a constant.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }

  /// Differentiates a scalar `loss` and adds d(loss)/d(t) into every watched
  /// tensor t. Calling it again adds the gradients a second time.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor* watched = nullptr;
    bool requires_grad = false;
  };
  struct Op {
    std::vector<int> inputs;
    int output = -1;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::vector<Op> ops_;
};

}  // namespace crowdsr

#endif  // CROWDSR_GRAPH_HPP
