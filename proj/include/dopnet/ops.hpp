#pragma once

#include <cstddef>

#include "dopnet/tensor.hpp"

// Differentiable array kernels. Every forward has a matching `*_backward`
// that maps the output cotangent to input cotangents.

namespace dopnet {

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

struct BinaryGrads {
  Tensor a;
  Tensor b;
};
BinaryGrads mul_backward(const Tensor& a, const Tensor& b, const Tensor& gy);

Tensor sigmoid(const Tensor& x);
double sigmoid(double x);
/// Takes the forward output y = sigmoid(x).
Tensor sigmoid_backward(const Tensor& y, const Tensor& gy);

double softplus(double x);
Tensor softplus(const Tensor& x);
Tensor softplus_backward(const Tensor& x, const Tensor& gy);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
BinaryGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& gy);

Tensor transpose(const Tensor& m);

Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis_backward(const Shape& input_shape, std::size_t axis,
                          const Tensor& gy);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Takes the forward output y.
Tensor softmax_backward(const Tensor& y, std::size_t axis, const Tensor& gy);

/// Bilinear lookup of f[C,H,W] at coords[N,2] given as (row, col) in
/// continuous pixel units, integer = pixel center. Columns wrap with period
/// W, rows clamp to [0, H-1]. Returns [C,N].
Tensor bilinear_sample(const Tensor& f, const Tensor& coords);

struct SampleGrads {
  Tensor feature;
  Tensor coords;
};
SampleGrads bilinear_sample_backward(const Tensor& f, const Tensor& coords,
                                     const Tensor& gy);

/// Bilinear resize [C,H,W] -> [C,h,w] with half-pixel centers, horizontal wrap.
Tensor resize_bilinear(const Tensor& f, std::size_t h, std::size_t w);
Tensor resize_bilinear_backward(const Tensor& f, std::size_t h, std::size_t w,
                                const Tensor& gy);

/// 3x3 convolution, padding 1: circular along columns, zero along rows.
/// x[I,H,W], weight[O,I,3,3], bias[O] -> [O, (H-1)/s+1, (W-1)/s+1].
Tensor conv3x3(const Tensor& x, const Tensor& weight, const Tensor& bias,
               std::size_t stride);

struct ConvGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
ConvGrads conv3x3_backward(const Tensor& x, const Tensor& weight,
                           std::size_t stride, const Tensor& gy);

/// 2x2 average pooling, stride 2. H and W must be even.
Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Shape& input_shape, const Tensor& gy);

}  // namespace dopnet
