#ifndef CROWDSR_OPS_HPP
#define CROWDSR_OPS_HPP

#include <vector>

#include "crowdsr/graph.hpp"
#include "crowdsr/tensor.hpp"

namespace crowdsr {

// Pure forward kernels on plain tensors. Each has a Var overload below that
// records the operation and its gradient routine.

/// 2-D cross-correlation with zero padding. weight is [C_out, C_in, k, k].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index stride = 1,
              Index padding = 0);

/// [N, C*r*r, H, W] -> [N, C, r*H, r*W] with
/// out[n, c, r*h + dy, r*w + dx] = in[n, c*r*r + dy*r + dx, h, w].
Tensor pixel_shuffle(const Tensor& input, Index r);
/// Inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, Index r);

Tensor relu(const Tensor& input);
Tensor max_pool2d(const Tensor& input, Index window = 2, Index stride = 2);
Tensor concat_channels(const std::vector<Tensor>& inputs);
/// Bilinear resize of every plane, half-pixel centers, clamped edges.
Tensor bilinear_resize(const Tensor& input, Index out_h, Index out_w);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum_all(const Tensor& a);
/// Mean of squared differences, as a scalar tensor.
Tensor mse(const Tensor& a, const Tensor& b);

Var conv2d(const Var& input, const Var& weight, const Var& bias, Index stride = 1,
           Index padding = 0);
Var pixel_shuffle(const Var& input, Index r);
Var pixel_unshuffle(const Var& input, Index r);
Var relu(const Var& input);
Var max_pool2d(const Var& input, Index window = 2, Index stride = 2);
Var concat_channels(const std::vector<Var>& inputs);
Var bilinear_resize(const Var& input, Index out_h, Index out_w);
Var add(const Var& a, const Var& b);
Var subtract(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var sum_all(const Var& a);
Var mse(const Var& a, const Var& b);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return subtract(a, b); }
inline Var operator*(double k, const Var& a) { return scale(a, k); }

}  // namespace crowdsr

#endif  // CROWDSR_OPS_HPP
