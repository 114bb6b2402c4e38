#include "crowdsr/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace crowdsr {

void adam_step(ModelParameters& params, AdamState& state, const AdamOptions& opts) {
  for (const NamedTensor& e : params.entries()) {
    if (!e.tensor.has_grad()) {
      throw std::invalid_argument("adam_step: parameter '" + e.name + "' has no gradient");
    }
  }

  const std::int64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(t));

  for (NamedTensor& e : params.entries()) {
    const Eigen::VectorXd& g = e.tensor.grad();
    auto [it, inserted] = state.moments.try_emplace(e.name);
    AdamState::Moments& mo = it->second;
    if (inserted || mo.m.size() != g.size()) {
      mo.m = Eigen::VectorXd::Zero(g.size());
      mo.v = Eigen::VectorXd::Zero(g.size());
    }
    mo.m = opts.beta1 * mo.m + (1.0 - opts.beta1) * g;
    mo.v = opts.beta2 * mo.v + (1.0 - opts.beta2) * g.cwiseProduct(g);
    e.tensor.data().array() -=
        opts.lr * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + opts.eps);
  }
  state.step = t;
}

}  // namespace crowdsr
