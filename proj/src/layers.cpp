#include "lmc/layers.hpp"

#include <algorithm>
#include <cmath>

namespace lmc {

template <typename T>
Parameter<T> uniform_fan_in(Shape shape, int fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<T>(uniform_real(rng, -bound, bound));
  return Parameter<T>(std::move(t));
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(int in, int out, int kernel, int stride_, int pad_,
                            Rng& rng)
    : weight(uniform_fan_in<T>({out, in, kernel, kernel}, in * kernel * kernel, rng)),
      bias(Tensor<T>({out})),
      stride(stride_),
      pad(pad_) {}

template <typename T>
Var<T> Conv2dLayer<T>::forward(const Var<T>& x) const {
  return ops::conv2d(x, weight.var(), bias.var(), stride, pad);
}

template <typename T>
void Conv2dLayer<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

template <typename T>
Conv3dLayer<T>::Conv3dLayer(int in, int out, const ops::Conv3dGeometry& g, Rng& rng)
    : weight(uniform_fan_in<T>({out, in, g.kt, g.kh, g.kw}, in * g.kt * g.kh * g.kw, rng)),
      bias(Tensor<T>({out})),
      geometry(g) {}

template <typename T>
Var<T> Conv3dLayer<T>::forward(const Var<T>& x) const {
  return ops::conv3d(x, weight.var(), bias.var(), geometry);
}

template <typename T>
void Conv3dLayer<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

template <typename T>
Deconv2dLayer<T>::Deconv2dLayer(int in, int out, int kernel, int stride_, int pad_,
                                Rng& rng)
    // Each output pixel sees about in * (kernel / stride)^2 inputs.
    : weight(uniform_fan_in<T>({in, out, kernel, kernel},
                               std::max(1, in * (kernel / stride_) * (kernel / stride_)),
                               rng)),
      bias(Tensor<T>({out})),
      stride(stride_),
      pad(pad_) {}

template <typename T>
Var<T> Deconv2dLayer<T>::forward(const Var<T>& x) const {
  return ops::conv_transpose2d(x, weight.var(), bias.var(), stride, pad);
}

template <typename T>
void Deconv2dLayer<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

template <typename T>
LinearLayer<T>::LinearLayer(int in, int out, Rng& rng)
    : weight(uniform_fan_in<T>({out, in}, in, rng)), bias(Tensor<T>({out})) {}

template <typename T>
Var<T> LinearLayer<T>::forward(const Var<T>& x) const {
  return ops::linear(x, weight.var(), bias.var());
}

template <typename T>
void LinearLayer<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

template Parameter<float> uniform_fan_in<float>(Shape, int, Rng&);
template Parameter<double> uniform_fan_in<double>(Shape, int, Rng&);
template struct Conv2dLayer<float>;
template struct Conv2dLayer<double>;
template struct Conv3dLayer<float>;
template struct Conv3dLayer<double>;
template struct Deconv2dLayer<float>;
template struct Deconv2dLayer<double>;
template struct LinearLayer<float>;
template struct LinearLayer<double>;

}  // namespace lmc
