#include <string>

#include "eigen_util.hpp"
#include "lmc/ops.hpp"

namespace lmc::ops {

namespace {

using detail::ConstMapRM;
using detail::MapRM;
using detail::MatrixRM;

// A convolution window sliding over one (channels, t, h, w) volume.
struct Window {
  int channels = 0, t = 0, h = 0, w = 0;
  Conv3dGeometry k;
  int to = 0, ho = 0, wo = 0;

  std::size_t volume() const {
    return static_cast<std::size_t>(channels) * t * h * w;
  }
  std::size_t rows() const {
    return static_cast<std::size_t>(channels) * k.kt * k.kh * k.kw;
  }
  std::size_t cols() const { return static_cast<std::size_t>(to) * ho * wo; }
};

Window make_window(int channels, int t, int h, int w, const Conv3dGeometry& k,
                   const char* op) {
  Window win{channels, t, h, w, k, 0, 0, 0};
  win.to = conv_out_size(t, k.kt, k.st, k.pt);
  win.ho = conv_out_size(h, k.kh, k.sh, k.ph);
  win.wo = conv_out_size(w, k.kw, k.sw, k.pw);
  if (win.to < 1 || win.ho < 1 || win.wo < 1) {
    throw ContractError(std::string(op) + ": kernel larger than padded input " +
                        shape_string({t, h, w}));
  }
  return win;
}

// Unfolds one volume into columns [col0, col0 + cols) of a row-major matrix
// with leading dimension `ld`.
template <typename T>
void im2col(const T* src, const Window& g, T* dst, std::size_t ld,
            std::size_t col0) {
  const auto& k = g.k;
  std::size_t row = 0;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * g.t * g.h * g.w;
    for (int dt = 0; dt < k.kt; ++dt) {
      for (int dy = 0; dy < k.kh; ++dy) {
        for (int dx = 0; dx < k.kw; ++dx, ++row) {
          T* out = dst + row * ld + col0;
          for (int ot = 0; ot < g.to; ++ot) {
            const int it = ot * k.st - k.pt + dt;
            for (int oy = 0; oy < g.ho; ++oy) {
              const int iy = oy * k.sh - k.ph + dy;
              const bool row_ok = it >= 0 && it < g.t && iy >= 0 && iy < g.h;
              const T* line = row_ok ? plane + (static_cast<std::size_t>(it) * g.h + iy) * g.w : nullptr;
              for (int ox = 0; ox < g.wo; ++ox) {
                const int ix = ox * k.sw - k.pw + dx;
                *out++ = (row_ok && ix >= 0 && ix < g.w) ? line[ix] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into a volume.
template <typename T>
void col2im(const T* col, const Window& g, T* dst, std::size_t ld,
            std::size_t col0) {
  const auto& k = g.k;
  std::size_t row = 0;
  for (int c = 0; c < g.channels; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * g.t * g.h * g.w;
    for (int dt = 0; dt < k.kt; ++dt) {
      for (int dy = 0; dy < k.kh; ++dy) {
        for (int dx = 0; dx < k.kw; ++dx, ++row) {
          const T* in = col + row * ld + col0;
          for (int ot = 0; ot < g.to; ++ot) {
            const int it = ot * k.st - k.pt + dt;
            for (int oy = 0; oy < g.ho; ++oy) {
              const int iy = oy * k.sh - k.ph + dy;
              if (it < 0 || it >= g.t || iy < 0 || iy >= g.h) {
                in += g.wo;
                continue;
              }
              T* line = plane + (static_cast<std::size_t>(it) * g.h + iy) * g.w;
              for (int ox = 0; ox < g.wo; ++ox, ++in) {
                const int ix = ox * k.sw - k.pw + dx;
                if (ix >= 0 && ix < g.w) line[ix] += *in;
              }
            }
          }
        }
      }
    }
  }
}

// [B, C, P] -> [C, B * P]
template <typename T>
void to_channel_major(const T* src, int batch, int channels, std::size_t plane,
                      T* dst) {
  const std::size_t ld = static_cast<std::size_t>(batch) * plane;
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      std::copy_n(src + (static_cast<std::size_t>(b) * channels + c) * plane,
                  plane, dst + c * ld + b * plane);
    }
  }
}

// [C, B * P] -> [B, C, P], accumulating.
template <typename T>
void add_from_channel_major(const T* src, int batch, int channels,
                            std::size_t plane, T* dst) {
  const std::size_t ld = static_cast<std::size_t>(batch) * plane;
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      T* out = dst + (static_cast<std::size_t>(b) * channels + c) * plane;
      const T* in = src + c * ld + b * plane;
      for (std::size_t p = 0; p < plane; ++p) out[p] += in[p];
    }
  }
}

template <typename T>
void check_bias(const Var<T>& b, int channels, const char* op) {
  if (b.shape() != Shape{channels}) {
    throw ContractError(std::string(op) + ": bias shape " +
                        shape_string(b.shape()) + " does not match " +
                        std::to_string(channels) + " output channels");
  }
}

// Shared forward/backward for conv2d and conv3d. `x` holds `batch` volumes
// described by `g`; the weight is viewed as [Co, g.rows()].
template <typename T>
Var<T> convolve(const Var<T>& x, const Var<T>& w, const Var<T>& b, int batch,
                const Window& g, int out_channels, Shape out_shape) {
  const std::size_t P = g.cols();
  const std::size_t K = g.rows();
  const std::size_t ld = static_cast<std::size_t>(batch) * P;

  MatrixRM<T> cols(K, ld);
  for (int bi = 0; bi < batch; ++bi) {
    im2col(x.value().data() + bi * g.volume(), g, cols.data(), ld, bi * P);
  }
  MatrixRM<T> y(out_channels, ld);
  y.noalias() = ConstMapRM<T>(w.value().data(), out_channels, K) * cols;
  for (int c = 0; c < out_channels; ++c) y.row(c).array() += b.value()[c];

  Tensor<T> out(std::move(out_shape));
  add_from_channel_major(y.data(), batch, out_channels, P, out.data());

  return make_result<T>(std::move(out), {x, w, b}, [batch, g, out_channels](Node<T>& n) {
    const std::size_t P = g.cols();
    const std::size_t K = g.rows();
    const std::size_t ld = static_cast<std::size_t>(batch) * P;
    Node<T>& xn = *n.inputs[0];
    Node<T>& wn = *n.inputs[1];
    Node<T>& bn = *n.inputs[2];

    MatrixRM<T> gy(out_channels, ld);
    to_channel_major(n.grad.data(), batch, out_channels, P, gy.data());

    if (bn.requires_grad) {
      Tensor<T>& gb = bn.grad_buffer();
      for (int c = 0; c < out_channels; ++c) gb[c] += gy.row(c).sum();
    }
    if (wn.requires_grad) {
      MatrixRM<T> cols(K, ld);
      for (int bi = 0; bi < batch; ++bi) {
        im2col(xn.value.data() + bi * g.volume(), g, cols.data(), ld, bi * P);
      }
      MapRM<T>(wn.grad_buffer().data(), out_channels, K).noalias() +=
          gy * cols.transpose();
    }
    if (xn.requires_grad) {
      MatrixRM<T> dcols(K, ld);
      dcols.noalias() =
          ConstMapRM<T>(wn.value.data(), out_channels, K).transpose() * gy;
      Tensor<T>& gx = xn.grad_buffer();
      for (int bi = 0; bi < batch; ++bi) {
        col2im(dcols.data(), g, gx.data() + bi * g.volume(), ld, bi * P);
      }
    }
  });
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride,
              int pad) {
  if (x.shape().size() != 4 || w.shape().size() != 4 ||
      w.dim(1) != x.dim(1)) {
    throw ContractError("conv2d: incompatible input " +
                        shape_string(x.shape()) + " and weight " +
                        shape_string(w.shape()));
  }
  check_bias(b, w.dim(0), "conv2d");
  Conv3dGeometry k;
  k.kh = w.dim(2);
  k.kw = w.dim(3);
  k.sh = k.sw = stride;
  k.ph = k.pw = pad;
  const Window g = make_window(x.dim(1), 1, x.dim(2), x.dim(3), k, "conv2d");
  return convolve(x, w, b, x.dim(0), g, w.dim(0),
                  {x.dim(0), w.dim(0), g.ho, g.wo});
}

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              const Conv3dGeometry& geometry) {
  if (x.shape().size() != 5 || w.shape().size() != 5 ||
      w.dim(1) != x.dim(1) || w.dim(2) != geometry.kt ||
      w.dim(3) != geometry.kh || w.dim(4) != geometry.kw) {
    throw ContractError("conv3d: incompatible input " +
                        shape_string(x.shape()) + " and weight " +
                        shape_string(w.shape()));
  }
  check_bias(b, w.dim(0), "conv3d");
  const Window g =
      make_window(x.dim(1), x.dim(2), x.dim(3), x.dim(4), geometry, "conv3d");
  return convolve(x, w, b, x.dim(0), g, w.dim(0),
                  {x.dim(0), w.dim(0), g.to, g.ho, g.wo});
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
                        int stride, int pad, int output_pad) {
  if (x.shape().size() != 4 || w.shape().size() != 4 ||
      w.dim(0) != x.dim(1)) {
    throw ContractError("conv_transpose2d: incompatible input " +
                        shape_string(x.shape()) + " and weight " +
                        shape_string(w.shape()));
  }
  if (output_pad < 0 || output_pad >= stride) {
    throw ContractError("conv_transpose2d: output padding must be in [0, stride)");
  }
  const int batch = x.dim(0), in_channels = x.dim(1);
  const int out_channels = w.dim(1);
  check_bias(b, out_channels, "conv_transpose2d");
  const int kh = w.dim(2), kw = w.dim(3);
  const int ho = deconv_out_size(x.dim(2), kh, stride, pad, output_pad);
  const int wo = deconv_out_size(x.dim(3), kw, stride, pad, output_pad);
  if (ho < 1 || wo < 1) {
    throw ContractError("conv_transpose2d: empty output for input " +
                        shape_string(x.shape()));
  }
  // The window slides over the *output* image; its column grid is the input.
  Conv3dGeometry k;
  k.kh = kh;
  k.kw = kw;
  k.sh = k.sw = stride;
  k.ph = k.pw = pad;
  const Window g =
      make_window(out_channels, 1, ho, wo, k, "conv_transpose2d");
  if (g.ho != x.dim(2) || g.wo != x.dim(3)) {
    throw ContractError("conv_transpose2d: inconsistent geometry");
  }

  const std::size_t P = g.cols();
  const std::size_t K = g.rows();
  const std::size_t ld = static_cast<std::size_t>(batch) * P;

  MatrixRM<T> xm(in_channels, ld);
  to_channel_major(x.value().data(), batch, in_channels, P, xm.data());
  MatrixRM<T> cols(K, ld);
  cols.noalias() =
      ConstMapRM<T>(w.value().data(), in_channels, K).transpose() * xm;

  Tensor<T> out({batch, out_channels, ho, wo});
  for (int bi = 0; bi < batch; ++bi) {
    col2im(cols.data(), g, out.data() + bi * g.volume(), ld, bi * P);
  }
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int bi = 0; bi < batch; ++bi) {
    for (int c = 0; c < out_channels; ++c) {
      T* dst = out.data() + (static_cast<std::size_t>(bi) * out_channels + c) * plane;
      const T bias = b.value()[c];
      for (std::size_t p = 0; p < plane; ++p) dst[p] += bias;
    }
  }

  return make_result<T>(std::move(out), {x, w, b},
                        [batch, in_channels, out_channels, g, plane](Node<T>& n) {
    const std::size_t P = g.cols();
    const std::size_t K = g.rows();
    const std::size_t ld = static_cast<std::size_t>(batch) * P;
    Node<T>& xn = *n.inputs[0];
    Node<T>& wn = *n.inputs[1];
    Node<T>& bn = *n.inputs[2];

    if (bn.requires_grad) {
      Tensor<T>& gb = bn.grad_buffer();
      for (int bi = 0; bi < batch; ++bi) {
        for (int c = 0; c < out_channels; ++c) {
          const T* src = n.grad.data() + (static_cast<std::size_t>(bi) * out_channels + c) * plane;
          T acc = 0;
          for (std::size_t p = 0; p < plane; ++p) acc += src[p];
          gb[c] += acc;
        }
      }
    }
    if (!xn.requires_grad && !wn.requires_grad) return;
    MatrixRM<T> dcols(K, ld);
    for (int bi = 0; bi < batch; ++bi) {
      im2col(n.grad.data() + bi * g.volume(), g, dcols.data(), ld, bi * P);
    }
    if (wn.requires_grad) {
      MatrixRM<T> xm(in_channels, ld);
      to_channel_major(xn.value.data(), batch, in_channels, P, xm.data());
      MapRM<T>(wn.grad_buffer().data(), in_channels, K).noalias() +=
          xm * dcols.transpose();
    }
    if (xn.requires_grad) {
      MatrixRM<T> dx(in_channels, ld);
      dx.noalias() = ConstMapRM<T>(wn.value.data(), in_channels, K) * dcols;
      add_from_channel_major(dx.data(), batch, in_channels, P,
                             xn.grad_buffer().data());
    }
  });
}

#define LMC_INSTANTIATE_CONV(T)                                                \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int,  \
                            int);                                              \
  template Var<T> conv3d<T>(const Var<T>&, const Var<T>&, const Var<T>&,       \
                            const Conv3dGeometry&);                            \
  template Var<T> conv_transpose2d<T>(const Var<T>&, const Var<T>&,            \
                                      const Var<T>&, int, int, int);

LMC_INSTANTIATE_CONV(float)
LMC_INSTANTIATE_CONV(double)

}  // namespace lmc::ops
