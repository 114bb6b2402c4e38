#include "crowdsr/graph.hpp"

#include <stdexcept>

#include "crowdsr/errors.hpp"

namespace crowdsr {

Graph& Var::graph() const {
  if (!graph_) throw std::logic_error("variable is not attached to a computation record");
  return *graph_;
}

const Tensor& Var::value() const { return graph().value(id_); }

bool Var::requires_grad() const { return graph().requires_grad(id_); }

Var Graph::watch(Tensor& t) {
  nodes_.push_back(Node{t, &t, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Tensor t) {
  nodes_.push_back(Node{std::move(t), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs_grad = false;
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph_ != this) throw std::logic_error("operation mixes computation records");
    needs_grad = needs_grad || nodes_[v.id_].requires_grad;
    ids.push_back(v.id_);
  }
  nodes_.push_back(Node{std::move(value), nullptr, needs_grad});
  const int out = static_cast<int>(nodes_.size()) - 1;
  if (needs_grad) ops_.push_back(Op{std::move(ids), out, std::move(backward)});
  return Var(this, out);
}

void Graph::backward(const Var& loss) {
  if (!loss.valid() || loss.graph_ != this) {
    throw std::logic_error("backward() requires a loss produced under this computation record");
  }
  if (loss.value().numel() != 1) {
    throw ShapeError("backward() requires a scalar loss, got shape " + loss.shape().str());
  }

  if (!nodes_[loss.id_].requires_grad) {
    throw std::logic_error("backward() on a loss that depends on no watched tensor");
  }

  std::vector<Eigen::VectorXd> grads(nodes_.size());
  grads[loss.id_] = Eigen::VectorXd::Ones(1);

  std::vector<Eigen::VectorXd*> in_grads;
  for (auto op = ops_.rbegin(); op != ops_.rend(); ++op) {
    if (grads[op->output].size() == 0) continue;
    in_grads.clear();
    for (int id : op->inputs) {
      if (!nodes_[id].requires_grad) {
        in_grads.push_back(nullptr);
        continue;
      }
      if (grads[id].size() == 0) grads[id] = Eigen::VectorXd::Zero(nodes_[id].value.numel());
      in_grads.push_back(&grads[id]);
    }
    op->backward(grads[op->output], in_grads);
  }

  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& node = nodes_[id];
    if (!node.watched) continue;
    Eigen::VectorXd& g = node.watched->ensure_grad();
    if (grads[id].size() != 0) g += grads[id];
  }
}

}  // namespace crowdsr
