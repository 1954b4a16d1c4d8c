#pragma once

#include <span>

#include "leaflite/tensor.hpp"

// Dense NHWC kernels for inference and head training.
//
// Every kernel accumulates each output element in one fixed order, so results
// are bit-identical from run to run.
namespace leaflite::ops {

enum class Padding { kSame, kValid };

struct ConvGeometry {
  int out = 0;
  int pad_before = 0;
  int pad_after = 0;
};

// `same`: out = ceil(in / stride), extra padding pixel goes bottom/right.
// `valid`: out = floor((in - kernel) / stride) + 1.
ConvGeometry conv_geometry(int in, int kernel, int stride, Padding padding);

// x: N x H x W x Cin, w: Kh x Kw x Cin x Cout, bias: empty or Cout.
// Cross-correlation, no kernel flip.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      std::span<const T> bias, int stride, Padding padding);

// x: N x H x W x C, w: Kh x Kw x C. One filter per channel.
template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                int stride, Padding padding);

// Per-channel normalization over the last axis:
// y = gamma * (x - mean) / sqrt(var + eps) + beta.
template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& x, std::span<const T> gamma,
                         std::span<const T> beta, std::span<const T> mean,
                         std::span<const T> var, T eps);

template <typename T>
void batchnorm_inplace(BasicTensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                       std::span<const T> mean, std::span<const T> var, T eps);

template <typename T>
BasicTensor<T> relu6(const BasicTensor<T>& x);

template <typename T>
void relu6_inplace(BasicTensor<T>& x);

template <typename T>
void relu_inplace(BasicTensor<T>& x);

template <typename T>
BasicTensor<T> residual_add(const BasicTensor<T>& x, const BasicTensor<T>& y);

// N x H x W x C -> N x 1 x 1 x C.
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

// x: N x F, w: F x U, b: U -> N x U.
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, std::span<const T> b);

// Row-wise softmax with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x);

}  // namespace leaflite::ops
