#ifndef CROWDSR_ADAM_HPP
#define CROWDSR_ADAM_HPP

#include <cstdint>
#include <map>
#include <string>

#include "crowdsr/model.hpp"

namespace crowdsr {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  struct Moments {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
  };
  std::int64_t step = 0;
  std::map<std::string, Moments> moments;
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// Throws std::invalid_argument naming the first parameter with no gradient.
void adam_step(ModelParameters& params, AdamState& state, const AdamOptions& opts);

}  // namespace crowdsr

#endif  // CROWDSR_ADAM_HPP
