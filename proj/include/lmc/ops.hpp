#pragma once

#include "lmc/autograd.hpp"

// Differentiable tensor operations. All are explicitly instantiated for float
// (training) and double (gradient verification).
namespace lmc::ops {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);

template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> leaky_relu(const Var<T>& x, T slope);

// Concatenate / slice along `axis`; all other dimensions must agree.
template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b, int axis);
template <typename T>
Var<T> slice(const Var<T>& x, int axis, int begin, int end);

template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);

// Mean over one axis, which is removed from the shape.
template <typename T> Var<T> mean(const Var<T>& x, int axis);

// Sum of every element, as a single-element tensor of shape {1}.
template <typename T> Var<T> sum(const Var<T>& x);

// [B, C] -> [B, C, H, W] by replication.
template <typename T>
Var<T> broadcast_spatial(const Var<T>& x, int height, int width);

// x[B, C, H, W] * a[B, C] broadcast over H, W.
template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& a);

// x[B, F] * w[O, F]^T + b[O]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

struct Conv3dGeometry {
  int kt = 1, kh = 1, kw = 1;
  int st = 1, sh = 1, sw = 1;
  int pt = 0, ph = 0, pw = 0;
};

// x[B, Ci, H, W], w[Co, Ci, k, k], b[Co]
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride,
              int pad);

// x[B, Ci, T, H, W], w[Co, Ci, kt, kh, kw], b[Co]
template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              const Conv3dGeometry& geometry);

// Transposed convolution. x[B, Ci, H, W], w[Ci, Co, k, k], b[Co]. Output
// spatial size is (in - 1) * stride - 2 * pad + k + output_pad.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
                        int stride, int pad, int output_pad = 0);

// Output spatial size of a convolution along one axis.
inline int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}
inline int deconv_out_size(int in, int kernel, int stride, int pad,
                           int output_pad = 0) {
  return (in - 1) * stride - 2 * pad + kernel + output_pad;
}

}  // namespace lmc::ops
