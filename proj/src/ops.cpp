#include "lmc/ops.hpp"

#include <cmath>

#include "eigen_util.hpp"

namespace lmc::ops {

namespace {

template <typename T>
Tensor<T>* input_grad(Node<T>& node, std::size_t i) {
  Node<T>& in = *node.inputs[i];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " +
                        shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw ContractError(std::string(op) + ": axis " + std::to_string(axis) +
                        " out of range for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(shape[i]);
  s.extent = static_cast<std::size_t>(shape[axis]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i) {
    s.inner *= static_cast<std::size_t>(shape[i]);
  }
  return s;
}

template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& x, F f, DF df_from_output_and_input) {
  Tensor<T> out(x.shape());
  const T* xs = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xs[i]);
  return make_result<T>(std::move(out), {x}, [df_from_output_and_input](Node<T>& n) {
    Tensor<T>* gx = input_grad(n, 0);
    if (!gx) return;
    const T* xin = n.inputs[0]->value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      (*gx)[i] += n.grad[i] * df_from_output_and_input(n.value[i], xin[i]);
    }
  });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Tensor<T> out = a.value();
  const T* bs = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bs[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor<T>* g = input_grad(n, k)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
      }
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "sub");
  Tensor<T> out = a.value();
  const T* bs = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bs[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (Tensor<T>* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    }
    if (Tensor<T>* g = input_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] -= n.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mul");
  Tensor<T> out = a.value();
  const T* bs = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bs[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const Tensor<T>& av = n.inputs[0]->value;
    const Tensor<T>& bv = n.inputs[1]->value;
    if (Tensor<T>* g = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    }
    if (Tensor<T>* g = input_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return unary<T>(
      a, [factor](T v) { return v * factor; },
      [factor](T, T) { return factor; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T y, T) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T y, T) { return T(1) - y * y; });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T, T v) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b, int axis) {
  const AxisSplit sa = split_axis(a.shape(), axis, "concat");
  const AxisSplit sb = split_axis(b.shape(), axis, "concat");
  Shape shape = a.shape();
  shape[axis] = 0;
  Shape other = b.shape();
  other[axis] = 0;
  if (shape != other) {
    throw ContractError("concat: incompatible shapes " +
                        shape_string(a.shape()) + " and " +
                        shape_string(b.shape()));
  }
  shape[axis] = a.dim(axis) + b.dim(axis);
  const std::size_t ca = sa.extent * sa.inner;
  const std::size_t cb = sb.extent * sb.inner;
  Tensor<T> out(shape);
  for (std::size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(a.value().data() + o * ca, ca, out.data() + o * (ca + cb));
    std::copy_n(b.value().data() + o * cb, cb, out.data() + o * (ca + cb) + ca);
  }
  const std::size_t outer = sa.outer;
  return make_result<T>(std::move(out), {a, b}, [outer, ca, cb](Node<T>& n) {
    Tensor<T>* ga = input_grad(n, 0);
    Tensor<T>* gb = input_grad(n, 1);
    for (std::size_t o = 0; o < outer; ++o) {
      const T* g = n.grad.data() + o * (ca + cb);
      if (ga) {
        T* dst = ga->data() + o * ca;
        for (std::size_t i = 0; i < ca; ++i) dst[i] += g[i];
      }
      if (gb) {
        T* dst = gb->data() + o * cb;
        for (std::size_t i = 0; i < cb; ++i) dst[i] += g[ca + i];
      }
    }
  });
}

template <typename T>
Var<T> slice(const Var<T>& x, int axis, int begin, int end) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (begin < 0 || end > x.dim(axis) || begin >= end) {
    throw ContractError("slice: range [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ") invalid for shape " +
                        shape_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t row = s.extent * s.inner;
  const std::size_t off = static_cast<std::size_t>(begin) * s.inner;
  const std::size_t len = static_cast<std::size_t>(end - begin) * s.inner;
  Tensor<T> out(shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.value().data() + o * row + off, len, out.data() + o * len);
  }
  const std::size_t outer = s.outer;
  return make_result<T>(std::move(out), {x}, [outer, row, off, len](Node<T>& n) {
    Tensor<T>* gx = input_grad(n, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o) {
      T* dst = gx->data() + o * row + off;
      const T* g = n.grad.data() + o * len;
      for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ContractError("reshape: cannot view " + shape_string(x.shape()) +
                        " as " + shape_string(shape));
  }
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_result<T>(std::move(out), {x}, [](Node<T>& n) {
    if (Tensor<T>* gx = input_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*gx)[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "mean");
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  Tensor<T> out(shape);
  const T inv = T(1) / static_cast<T>(s.extent);
  const T* xs = x.value().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    T* dst = out.data() + o * s.inner;
    for (std::size_t e = 0; e < s.extent; ++e) {
      const T* src = xs + (o * s.extent + e) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < s.inner; ++i) dst[i] *= inv;
  }
  return make_result<T>(std::move(out), {x}, [s, inv](Node<T>& n) {
    Tensor<T>* gx = input_grad(n, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      const T* g = n.grad.data() + o * s.inner;
      for (std::size_t e = 0; e < s.extent; ++e) {
        T* dst = gx->data() + (o * s.extent + e) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i] * inv;
      }
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().values()) total += v;
  return make_result<T>(Tensor<T>({1}, total), {x}, [](Node<T>& n) {
    Tensor<T>* gx = input_grad(n, 0);
    if (!gx) return;
    const T g = n.grad[0];
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
  });
}

template <typename T>
Var<T> broadcast_spatial(const Var<T>& x, int height, int width) {
  if (x.shape().size() != 2) {
    throw ContractError("broadcast_spatial: expected [B, C], got " +
                        shape_string(x.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  Tensor<T> out({x.dim(0), x.dim(1), height, width});
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::fill_n(out.data() + i * plane, plane, x.value()[i]);
  }
  return make_result<T>(std::move(out), {x}, [plane](Node<T>& n) {
    Tensor<T>* gx = input_grad(n, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < gx->size(); ++i) {
      const T* g = n.grad.data() + i * plane;
      T acc = 0;
      for (std::size_t p = 0; p < plane; ++p) acc += g[p];
      (*gx)[i] += acc;
    }
  });
}

template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& a) {
  if (x.shape().size() != 4 || a.shape() != Shape{x.dim(0), x.dim(1)}) {
    throw ContractError("channel_scale: cannot scale " +
                        shape_string(x.shape()) + " by " +
                        shape_string(a.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T w = a.value()[i];
    T* dst = out.data() + i * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] *= w;
  }
  return make_result<T>(std::move(out), {x, a}, [plane](Node<T>& n) {
    const Tensor<T>& xv = n.inputs[0]->value;
    const Tensor<T>& av = n.inputs[1]->value;
    Tensor<T>* gx = input_grad(n, 0);
    Tensor<T>* ga = input_grad(n, 1);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T* g = n.grad.data() + i * plane;
      const T* xs = xv.data() + i * plane;
      if (gx) {
        T* dst = gx->data() + i * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] += g[p] * av[i];
      }
      if (ga) {
        T acc = 0;
        for (std::size_t p = 0; p < plane; ++p) acc += g[p] * xs[p];
        (*ga)[i] += acc;
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2 ||
      w.dim(1) != x.dim(1) || b.shape() != Shape{w.dim(0)}) {
    throw ContractError("linear: incompatible shapes x" +
                        shape_string(x.shape()) + " w" +
                        shape_string(w.shape()) + " b" +
                        shape_string(b.shape()));
  }
  using detail::ConstMapRM;
  using detail::MapRM;
  const int batch = x.dim(0), in = x.dim(1), outf = w.dim(0);
  Tensor<T> out({batch, outf});
  MapRM<T> y(out.data(), batch, outf);
  y.noalias() = ConstMapRM<T>(x.value().data(), batch, in) *
                ConstMapRM<T>(w.value().data(), outf, in).transpose();
  for (int r = 0; r < batch; ++r) {
    for (int c = 0; c < outf; ++c) y(r, c) += b.value()[c];
  }
  return make_result<T>(std::move(out), {x, w, b}, [batch, in, outf](Node<T>& n) {
    ConstMapRM<T> g(n.grad.data(), batch, outf);
    if (Tensor<T>* gx = input_grad(n, 0)) {
      MapRM<T>(gx->data(), batch, in).noalias() +=
          g * ConstMapRM<T>(n.inputs[1]->value.data(), outf, in);
    }
    if (Tensor<T>* gw = input_grad(n, 1)) {
      MapRM<T>(gw->data(), outf, in).noalias() +=
          g.transpose() * ConstMapRM<T>(n.inputs[0]->value.data(), batch, in);
    }
    if (Tensor<T>* gb = input_grad(n, 2)) {
      for (int r = 0; r < batch; ++r) {
        for (int c = 0; c < outf; ++c) (*gb)[c] += g(r, c);
      }
    }
  });
}

#define LMC_INSTANTIATE_OPS(T)                                            \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                   \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                   \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                   \
  template Var<T> scale<T>(const Var<T>&, T);                             \
  template Var<T> sigmoid<T>(const Var<T>&);                              \
  template Var<T> tanh<T>(const Var<T>&);                                 \
  template Var<T> leaky_relu<T>(const Var<T>&, T);                        \
  template Var<T> concat<T>(const Var<T>&, const Var<T>&, int);           \
  template Var<T> slice<T>(const Var<T>&, int, int, int);                 \
  template Var<T> reshape<T>(const Var<T>&, Shape);                       \
  template Var<T> mean<T>(const Var<T>&, int);                            \
  template Var<T> sum<T>(const Var<T>&);                                  \
  template Var<T> broadcast_spatial<T>(const Var<T>&, int, int);          \
  template Var<T> channel_scale<T>(const Var<T>&, const Var<T>&);         \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);

LMC_INSTANTIATE_OPS(float)
LMC_INSTANTIATE_OPS(double)

}  // namespace lmc::ops
