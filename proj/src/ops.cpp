#include "crowdsr/ops.hpp"

#include <algorithm>
#include <string>

#include "crowdsr/errors.hpp"
#include "crowdsr/resample.hpp"

namespace crowdsr {

namespace {

using ConstRowMap = Eigen::Map<const RowMatrixXd>;
using RowMap = Eigen::Map<RowMatrixXd>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string dim(const char* name, Index got, Index want) {
  return std::string(name) + " is " + std::to_string(got) + ", expected " + std::to_string(want);
}

struct ConvGeometry {
  Index n, c_in, h, w, c_out, k, stride, pad, h_out, w_out;
  Index patch() const { return c_in * k * k; }
  Index positions() const { return h_out * w_out; }
  bool is_pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

ConvGeometry conv_geometry(const Shape& in, const Shape& wt, const Shape& b, Index stride,
                           Index pad) {
  require(stride >= 1, "conv2d: stride must be positive");
  require(pad >= 0, "conv2d: padding must be non-negative");
  require(wt.h == wt.w, "conv2d: kernel must be square, got " + wt.str());
  require(wt.c == in.c, "conv2d: input channels " + dim("C_in", in.c, wt.c));
  require(b.numel() == wt.n, "conv2d: bias length " + dim("C_out", b.numel(), wt.n));
  const Index k = wt.h;
  require(k <= in.h + 2 * pad, "conv2d: kernel " + std::to_string(k) +
                                   " exceeds padded height " + std::to_string(in.h + 2 * pad));
  require(k <= in.w + 2 * pad, "conv2d: kernel " + std::to_string(k) +
                                   " exceeds padded width " + std::to_string(in.w + 2 * pad));
  return {in.n, in.c, in.h, in.w, wt.n, k, stride, pad,
          (in.h + 2 * pad - k) / stride + 1, (in.w + 2 * pad - k) / stride + 1};
}

// Unfolds batch item n of `x` into a (C_in*k*k) x (H'*W') patch matrix.
void im2col(const ConvGeometry& g, const double* x, RowMatrixXd& cols) {
  cols.resize(g.patch(), g.positions());
  for (Index ci = 0; ci < g.c_in; ++ci) {
    const double* plane = x + ci * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        double* row = cols.data() + ((ci * g.k + ky) * g.k + kx) * g.positions();
        for (Index oy = 0; oy < g.h_out; ++oy) {
          const Index iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.w_out;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.w_out, 0.0);
            continue;
          }
          for (Index ox = 0; ox < g.w_out; ++ox) {
            const Index ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix < 0 || ix >= g.w) ? 0.0 : plane[iy * g.w + ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const RowMatrixXd& cols, double* dx) {
  for (Index ci = 0; ci < g.c_in; ++ci) {
    double* plane = dx + ci * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        const double* row = cols.data() + ((ci * g.k + ky) * g.k + kx) * g.positions();
        for (Index oy = 0; oy < g.h_out; ++oy) {
          const Index iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (Index ox = 0; ox < g.w_out; ++ox) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) plane[iy * g.w + ix] += row[oy * g.w_out + ox];
          }
        }
      }
    }
  }
}

Tensor conv_forward(const ConvGeometry& g, const Tensor& input, const Tensor& weight,
                    const Tensor& bias) {
  Tensor out({g.n, g.c_out, g.h_out, g.w_out});
  ConstRowMap wm(weight.data().data(), g.c_out, g.patch());
  RowMatrixXd cols;
  for (Index n = 0; n < g.n; ++n) {
    const double* x = input.data().data() + n * g.c_in * g.h * g.w;
    RowMap y(out.data().data() + n * g.c_out * g.positions(), g.c_out, g.positions());
    if (g.is_pointwise()) {
      y.noalias() = wm * ConstRowMap(x, g.c_in, g.positions());
    } else {
      im2col(g, x, cols);
      y.noalias() = wm * cols;
    }
    y.colwise() += bias.data();
  }
  return out;
}

struct PoolResult {
  Tensor out;
  std::vector<Index> argmax;  // flat input index per output element
};

PoolResult pool_forward(const Tensor& input, Index window, Index stride) {
  const Shape& s = input.shape();
  require(window >= 1 && stride >= 1, "max_pool2d: window and stride must be positive");
  require(s.h % stride == 0, "max_pool2d: height " + std::to_string(s.h) +
                                 " not divisible by stride " + std::to_string(stride));
  require(s.w % stride == 0, "max_pool2d: width " + std::to_string(s.w) +
                                 " not divisible by stride " + std::to_string(stride));
  require(window <= s.h && window <= s.w, "max_pool2d: window larger than input");
  const Index ho = (s.h - window) / stride + 1;
  const Index wo = (s.w - window) / stride + 1;
  PoolResult r{Tensor({s.n, s.c, ho, wo}), {}};
  r.argmax.resize(r.out.numel());
  Index o = 0;
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index y = 0; y < ho; ++y)
        for (Index x = 0; x < wo; ++x, ++o) {
          Index best = input.offset(n, c, y * stride, x * stride);
          for (Index dy = 0; dy < window; ++dy)
            for (Index dx = 0; dx < window; ++dx) {
              const Index i = input.offset(n, c, y * stride + dy, x * stride + dx);
              if (input.data()[i] > input.data()[best]) best = i;
            }
          r.argmax[o] = best;
          r.out.data()[o] = input.data()[best];
        }
  return r;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor kernels

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index stride,
              Index padding) {
  const auto g = conv_geometry(input.shape(), weight.shape(), bias.shape(), stride, padding);
  return conv_forward(g, input, weight, bias);
}

Tensor pixel_shuffle(const Tensor& input, Index r) {
  const Shape& s = input.shape();
  require(r >= 1, "pixel_shuffle: factor must be positive");
  require(s.c % (r * r) == 0, "pixel_shuffle: channels " + std::to_string(s.c) +
                                  " not divisible by r^2 = " + std::to_string(r * r));
  const Index c_out = s.c / (r * r);
  Tensor out({s.n, c_out, s.h * r, s.w * r});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < c_out; ++c)
      for (Index dy = 0; dy < r; ++dy)
        for (Index dx = 0; dx < r; ++dx) {
          const Index src_c = c * r * r + dy * r + dx;
          for (Index h = 0; h < s.h; ++h)
            for (Index w = 0; w < s.w; ++w)
              out.at(n, c, r * h + dy, r * w + dx) = input.at(n, src_c, h, w);
        }
  return out;
}

Tensor pixel_unshuffle(const Tensor& input, Index r) {
  const Shape& s = input.shape();
  require(r >= 1, "pixel_unshuffle: factor must be positive");
  require(s.h % r == 0, "pixel_unshuffle: height " + std::to_string(s.h) +
                            " not divisible by " + std::to_string(r));
  require(s.w % r == 0, "pixel_unshuffle: width " + std::to_string(s.w) +
                            " not divisible by " + std::to_string(r));
  Tensor out({s.n, s.c * r * r, s.h / r, s.w / r});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index dy = 0; dy < r; ++dy)
        for (Index dx = 0; dx < r; ++dx) {
          const Index dst_c = c * r * r + dy * r + dx;
          for (Index h = 0; h < s.h / r; ++h)
            for (Index w = 0; w < s.w / r; ++w)
              out.at(n, dst_c, h, w) = input.at(n, c, r * h + dy, r * w + dx);
        }
  return out;
}

Tensor relu(const Tensor& input) {
  return Tensor(input.shape(), input.data().cwiseMax(0.0));
}

Tensor max_pool2d(const Tensor& input, Index window, Index stride) {
  return pool_forward(input, window, stride).out;
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
  require(!inputs.empty(), "concat_channels: no inputs");
  Shape s = inputs.front().shape();
  s.c = 0;
  for (const Tensor& t : inputs) {
    const Shape& ts = t.shape();
    require(ts.n == s.n, "concat_channels: batch " + dim("extent", ts.n, s.n));
    require(ts.h == s.h, "concat_channels: height " + dim("extent", ts.h, s.h));
    require(ts.w == s.w, "concat_channels: width " + dim("extent", ts.w, s.w));
    s.c += ts.c;
  }
  Tensor out(s);
  for (Index n = 0; n < s.n; ++n) {
    Index c0 = 0;
    for (const Tensor& t : inputs) {
      const Index len = t.shape().c * s.plane();
      out.data().segment(out.offset(n, c0, 0, 0), len) = t.data().segment(t.offset(n, 0, 0, 0), len);
      c0 += t.shape().c;
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, Index out_h, Index out_w) {
  const Shape& s = input.shape();
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: target extents must be positive");
  const Eigen::MatrixXd ry = interpolation_matrix<double>(s.h, out_h, Interpolation::linear);
  const Eigen::MatrixXd rx = interpolation_matrix<double>(s.w, out_w, Interpolation::linear);
  Tensor out({s.n, s.c, out_h, out_w});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) out.plane(n, c).noalias() = ry * input.plane(n, c) * rx.transpose();
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  return Tensor(a.shape(), a.data() + b.data());
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  require_same(a, b, "subtract");
  return Tensor(a.shape(), a.data() - b.data());
}

Tensor scale(const Tensor& a, double factor) { return Tensor(a.shape(), a.data() * factor); }

Tensor sum_all(const Tensor& a) { return Tensor::scalar(a.data().sum()); }

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mse");
  require(a.numel() > 0, "mse: empty tensors");
  return Tensor::scalar((a.data() - b.data()).squaredNorm() / static_cast<double>(a.numel()));
}

// ---------------------------------------------------------------------------
// Recorded operations

Var conv2d(const Var& input, const Var& weight, const Var& bias, Index stride, Index padding) {
  const Tensor* x = &input.value();
  const Tensor* wt = &weight.value();
  const auto g = conv_geometry(x->shape(), wt->shape(), bias.shape(), stride, padding);
  Tensor out = conv_forward(g, *x, *wt, bias.value());
  return input.graph().record(
      std::move(out), {input, weight, bias},
      [g, x, wt](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
        ConstRowMap wm(wt->data().data(), g.c_out, g.patch());
        RowMatrixXd cols;
        RowMatrixXd dcols;
        for (Index n = 0; n < g.n; ++n) {
          ConstRowMap dy(gout.data() + n * g.c_out * g.positions(), g.c_out, g.positions());
          const double* xn = x->data().data() + n * g.c_in * g.h * g.w;
          if (gin[1]) {
            RowMap dw(gin[1]->data(), g.c_out, g.patch());
            if (g.is_pointwise()) {
              dw.noalias() += dy * ConstRowMap(xn, g.c_in, g.positions()).transpose();
            } else {
              im2col(g, xn, cols);
              dw.noalias() += dy * cols.transpose();
            }
          }
          if (gin[2]) *gin[2] += dy.rowwise().sum();
          if (gin[0]) {
            double* dxn = gin[0]->data() + n * g.c_in * g.h * g.w;
            if (g.is_pointwise()) {
              RowMap(dxn, g.c_in, g.positions()).noalias() += wm.transpose() * dy;
            } else {
              dcols.noalias() = wm.transpose() * dy;
              col2im_add(g, dcols, dxn);
            }
          }
        }
      });
}

Var pixel_shuffle(const Var& input, Index r) {
  Tensor out = pixel_shuffle(input.value(), r);
  const Shape out_shape = out.shape();
  return input.graph().record(std::move(out), {input},
                              [r, out_shape](const Eigen::VectorXd& gout,
                                             std::span<Eigen::VectorXd*> gin) {
                                *gin[0] += pixel_unshuffle(Tensor(out_shape, gout), r).data();
                              });
}

Var pixel_unshuffle(const Var& input, Index r) {
  Tensor out = pixel_unshuffle(input.value(), r);
  const Shape out_shape = out.shape();
  return input.graph().record(std::move(out), {input},
                              [r, out_shape](const Eigen::VectorXd& gout,
                                             std::span<Eigen::VectorXd*> gin) {
                                *gin[0] += pixel_shuffle(Tensor(out_shape, gout), r).data();
                              });
}

Var relu(const Var& input) {
  const Tensor* x = &input.value();
  return input.graph().record(
      relu(*x), {input}, [x](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
        *gin[0] += (x->data().array() > 0.0).select(gout, 0.0);
      });
}

Var max_pool2d(const Var& input, Index window, Index stride) {
  PoolResult r = pool_forward(input.value(), window, stride);
  return input.graph().record(
      std::move(r.out), {input},
      [argmax = std::move(r.argmax)](const Eigen::VectorXd& gout,
                                     std::span<Eigen::VectorXd*> gin) {
        for (std::size_t o = 0; o < argmax.size(); ++o) (*gin[0])[argmax[o]] += gout[o];
      });
}

Var concat_channels(const std::vector<Var>& inputs) {
  require(!inputs.empty(), "concat_channels: no inputs");
  std::vector<Tensor> values;
  values.reserve(inputs.size());
  for (const Var& v : inputs) values.push_back(v.value());
  Tensor out = concat_channels(values);
  const Shape s = out.shape();
  std::vector<Index> widths;
  for (const Tensor& t : values) widths.push_back(t.shape().c);
  return inputs.front().graph().record(
      std::move(out), inputs,
      [s, widths](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
        for (Index n = 0; n < s.n; ++n) {
          Index c0 = 0;
          for (std::size_t i = 0; i < widths.size(); ++i) {
            const Index len = widths[i] * s.plane();
            if (gin[i]) {
              gin[i]->segment(n * len, len) += gout.segment((n * s.c + c0) * s.plane(), len);
            }
            c0 += widths[i];
          }
        }
      });
}

Var bilinear_resize(const Var& input, Index out_h, Index out_w) {
  const Shape s = input.shape();
  Tensor out = bilinear_resize(input.value(), out_h, out_w);
  return input.graph().record(
      std::move(out), {input},
      [s, out_h, out_w](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
        const Eigen::MatrixXd ry = interpolation_matrix<double>(s.h, out_h, Interpolation::linear);
        const Eigen::MatrixXd rx = interpolation_matrix<double>(s.w, out_w, Interpolation::linear);
        for (Index n = 0; n < s.n; ++n)
          for (Index c = 0; c < s.c; ++c) {
            ConstRowMap dy(gout.data() + (n * s.c + c) * out_h * out_w, out_h, out_w);
            RowMap dx(gin[0]->data() + (n * s.c + c) * s.plane(), s.h, s.w);
            dx.noalias() += ry.transpose() * dy * rx;
          }
      });
}

Var add(const Var& a, const Var& b) {
  return a.graph().record(add(a.value(), b.value()), {a, b},
                          [](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
                            if (gin[0]) *gin[0] += gout;
                            if (gin[1]) *gin[1] += gout;
                          });
}

Var subtract(const Var& a, const Var& b) {
  return a.graph().record(subtract(a.value(), b.value()), {a, b},
                          [](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
                            if (gin[0]) *gin[0] += gout;
                            if (gin[1]) *gin[1] -= gout;
                          });
}

Var scale(const Var& a, double factor) {
  return a.graph().record(scale(a.value(), factor), {a},
                          [factor](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
                            *gin[0] += factor * gout;
                          });
}

Var sum_all(const Var& a) {
  return a.graph().record(sum_all(a.value()), {a},
                          [](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
                            gin[0]->array() += gout[0];
                          });
}

Var mse(const Var& a, const Var& b) {
  const Tensor* av = &a.value();
  const Tensor* bv = &b.value();
  return a.graph().record(
      mse(*av, *bv), {a, b},
      [av, bv](const Eigen::VectorXd& gout, std::span<Eigen::VectorXd*> gin) {
        const double k = 2.0 * gout[0] / static_cast<double>(av->numel());
        if (gin[0]) *gin[0] += k * (av->data() - bv->data());
        if (gin[1]) *gin[1] -= k * (av->data() - bv->data());
      });
}

}  // namespace crowdsr
