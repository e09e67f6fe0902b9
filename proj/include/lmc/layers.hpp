#pragma once

#include <string>
#include <vector>

#include "lmc/ops.hpp"
#include "lmc/rng.hpp"

namespace lmc {

template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

// He-uniform weights, U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases start at 0.
template <typename T>
Parameter<T> uniform_fan_in(Shape shape, int fan_in, Rng& rng);

template <typename T>
struct Conv2dLayer {
  Parameter<T> weight;  // [Co, Ci, k, k]
  Parameter<T> bias;    // [Co]
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(int in, int out, int kernel, int stride, int pad, Rng& rng);
  Var<T> forward(const Var<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix);
};

template <typename T>
struct Conv3dLayer {
  Parameter<T> weight;  // [Co, Ci, kt, kh, kw]
  Parameter<T> bias;
  ops::Conv3dGeometry geometry;

  Conv3dLayer() = default;
  Conv3dLayer(int in, int out, const ops::Conv3dGeometry& geometry, Rng& rng);
  Var<T> forward(const Var<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix);
};

template <typename T>
struct Deconv2dLayer {
  Parameter<T> weight;  // [Ci, Co, k, k]
  Parameter<T> bias;    // [Co]
  int stride = 1;
  int pad = 0;

  Deconv2dLayer() = default;
  Deconv2dLayer(int in, int out, int kernel, int stride, int pad, Rng& rng);
  Var<T> forward(const Var<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix);
};

template <typename T>
struct LinearLayer {
  Parameter<T> weight;  // [O, F]
  Parameter<T> bias;    // [O]

  LinearLayer() = default;
  LinearLayer(int in, int out, Rng& rng);
  Var<T> forward(const Var<T>& x) const;
  void collect(ParameterList<T>& out, const std::string& prefix);
};

}  // namespace lmc
