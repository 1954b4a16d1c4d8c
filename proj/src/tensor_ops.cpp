#include "leaflite/tensor_ops.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

namespace leaflite::ops {
namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void require_rank(const Shape& s, int rank, const char* what) {
  if (s.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + s.str());
  }
}

template <typename T>
void require_channels(std::span<const T> v, int channels, const char* what) {
  if (v.size() != sz(channels)) {
    throw ShapeError(std::string("batchnorm: ") + what + " has length " +
                     std::to_string(v.size()) + ", expected " + std::to_string(channels));
  }
}

#ifndef NDEBUG
template <typename T>
void debug_check_finite(const BasicTensor<T>& t) {
  assert(all_finite(t));
}
#else
template <typename T>
void debug_check_finite(const BasicTensor<T>&) {}
#endif

}  // namespace

ConvGeometry conv_geometry(int in, int kernel, int stride, Padding padding) {
  if (stride < 1) throw ShapeError("stride must be >= 1");
  ConvGeometry g;
  if (padding == Padding::kSame) {
    g.out = (in + stride - 1) / stride;
    const int total = std::max((g.out - 1) * stride + kernel - in, 0);
    g.pad_before = total / 2;
    g.pad_after = total - g.pad_before;
  } else {
    if (in < kernel) {
      throw ShapeError("valid convolution: input extent " + std::to_string(in) +
                       " smaller than kernel " + std::to_string(kernel));
    }
    g.out = (in - kernel) / stride + 1;
  }
  return g;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, std::span<const T> bias,
                      int stride, Padding padding) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(w.shape(), 4, "conv2d kernel");
  const int n_batch = x.dim(0), in_h = x.dim(1), in_w = x.dim(2), cin = x.dim(3);
  const int kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
  if (w.dim(2) != cin) {
    throw ShapeError("conv2d: input " + x.shape().str() + " incompatible with kernel " +
                     w.shape().str());
  }
  if (!bias.empty() && bias.size() != sz(cout)) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                     " does not match kernel " + w.shape().str());
  }
  const ConvGeometry gh = conv_geometry(in_h, kh, stride, padding);
  const ConvGeometry gw = conv_geometry(in_w, kw, stride, padding);

  BasicTensor<T> y(Shape{n_batch, gh.out, gw.out, cout});
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  T* yd = y.data().data();

  for (int n = 0; n < n_batch; ++n) {
    for (int oh = 0; oh < gh.out; ++oh) {
      for (int ow = 0; ow < gw.out; ++ow) {
        T* __restrict acc = yd + ((sz(n) * sz(gh.out) + sz(oh)) * sz(gw.out) + sz(ow)) * sz(cout);
        if (bias.empty()) {
          std::fill(acc, acc + cout, T{0});
        } else {
          std::copy(bias.begin(), bias.end(), acc);
        }
        for (int ky = 0; ky < kh; ++ky) {
          const int ih = oh * stride - gh.pad_before + ky;
          if (ih < 0 || ih >= in_h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int iw = ow * stride - gw.pad_before + kx;
            if (iw < 0 || iw >= in_w) continue;
            const T* xp = xd + ((sz(n) * sz(in_h) + sz(ih)) * sz(in_w) + sz(iw)) * sz(cin);
            const T* wp = wd + (sz(ky) * sz(kw) + sz(kx)) * sz(cin) * sz(cout);
            for (int ci = 0; ci < cin; ++ci) {
              const T xv = xp[ci];
              const T* __restrict wr = wp + sz(ci) * sz(cout);
              for (int co = 0; co < cout; ++co) acc[co] += xv * wr[co];
            }
          }
        }
      }
    }
  }
  debug_check_finite(y);
  return y;
}

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride,
                                Padding padding) {
  require_rank(x.shape(), 4, "depthwise_conv2d input");
  require_rank(w.shape(), 3, "depthwise_conv2d kernel");
  const int n_batch = x.dim(0), in_h = x.dim(1), in_w = x.dim(2), c = x.dim(3);
  const int kh = w.dim(0), kw = w.dim(1);
  if (w.dim(2) != c) {
    throw ShapeError("depthwise_conv2d: input " + x.shape().str() +
                     " incompatible with kernel " + w.shape().str());
  }
  const ConvGeometry gh = conv_geometry(in_h, kh, stride, padding);
  const ConvGeometry gw = conv_geometry(in_w, kw, stride, padding);

  BasicTensor<T> y(Shape{n_batch, gh.out, gw.out, c});
  const T* xd = x.data().data();
  const T* wd = w.data().data();
  T* yd = y.data().data();

  for (int n = 0; n < n_batch; ++n) {
    for (int oh = 0; oh < gh.out; ++oh) {
      for (int ow = 0; ow < gw.out; ++ow) {
        T* __restrict acc = yd + ((sz(n) * sz(gh.out) + sz(oh)) * sz(gw.out) + sz(ow)) * sz(c);
        for (int ky = 0; ky < kh; ++ky) {
          const int ih = oh * stride - gh.pad_before + ky;
          if (ih < 0 || ih >= in_h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int iw = ow * stride - gw.pad_before + kx;
            if (iw < 0 || iw >= in_w) continue;
            const T* __restrict xp = xd + ((sz(n) * sz(in_h) + sz(ih)) * sz(in_w) + sz(iw)) * sz(c);
            const T* __restrict wp = wd + (sz(ky) * sz(kw) + sz(kx)) * sz(c);
            for (int ch = 0; ch < c; ++ch) acc[ch] += xp[ch] * wp[ch];
          }
        }
      }
    }
  }
  debug_check_finite(y);
  return y;
}

template <typename T>
void batchnorm_inplace(BasicTensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                       std::span<const T> mean, std::span<const T> var, T eps) {
  if (x.rank() < 1) throw ShapeError("batchnorm: empty tensor");
  const int c = x.dim(x.rank() - 1);
  require_channels(gamma, c, "gamma");
  require_channels(beta, c, "beta");
  require_channels(mean, c, "mean");
  require_channels(var, c, "var");
  std::vector<T> scale(sz(c));
  for (int ch = 0; ch < c; ++ch) {
    if (var[sz(ch)] < T{0}) throw NumericError("batchnorm: negative variance");
    scale[sz(ch)] = gamma[sz(ch)] / std::sqrt(var[sz(ch)] + eps);
  }
  T* d = x.data().data();
  const std::size_t rows = x.size() / sz(c);
  for (std::size_t r = 0; r < rows; ++r) {
    T* __restrict row = d + r * sz(c);
    for (int ch = 0; ch < c; ++ch) {
      row[ch] = (row[ch] - mean[sz(ch)]) * scale[sz(ch)] + beta[sz(ch)];
    }
  }
}

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& x, std::span<const T> gamma,
                         std::span<const T> beta, std::span<const T> mean,
                         std::span<const T> var, T eps) {
  BasicTensor<T> y = x;
  batchnorm_inplace(y, gamma, beta, mean, var, eps);
  return y;
}

template <typename T>
void relu6_inplace(BasicTensor<T>& x) {
  for (T& v : x.data()) v = std::min(std::max(v, T{0}), T{6});
}

template <typename T>
BasicTensor<T> relu6(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  relu6_inplace(y);
  return y;
}

template <typename T>
void relu_inplace(BasicTensor<T>& x) {
  for (T& v : x.data()) v = std::max(v, T{0});
}

template <typename T>
BasicTensor<T> residual_add(const BasicTensor<T>& x, const BasicTensor<T>& y) {
  if (!(x.shape() == y.shape())) {
    throw ShapeError("residual_add: shapes " + x.shape().str() + " and " + y.shape().str() +
                     " differ");
  }
  BasicTensor<T> z = x;
  auto zd = z.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < zd.size(); ++i) zd[i] += yd[i];
  return z;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool input");
  const int n_batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (h < 1 || w < 1) throw ShapeError("global_avg_pool: empty spatial extent");
  BasicTensor<T> y(Shape{n_batch, 1, 1, c});
  const std::size_t plane = sz(h) * sz(w);
  for (int n = 0; n < n_batch; ++n) {
    T* __restrict acc = y.data().data() + sz(n) * sz(c);
    const T* xp = x.data().data() + sz(n) * plane * sz(c);
    for (std::size_t p = 0; p < plane; ++p) {
      const T* __restrict px = xp + p * sz(c);
      for (int ch = 0; ch < c; ++ch) acc[ch] += px[ch];
    }
    const T inv = T{1} / static_cast<T>(plane);
    for (int ch = 0; ch < c; ++ch) acc[ch] *= inv;
  }
  return y;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& w, std::span<const T> b) {
  require_rank(x.shape(), 2, "dense input");
  require_rank(w.shape(), 2, "dense kernel");
  const int n_rows = x.dim(0), f = x.dim(1), u = w.dim(1);
  if (w.dim(0) != f) {
    throw ShapeError("dense: input " + x.shape().str() + " incompatible with kernel " +
                     w.shape().str());
  }
  if (b.size() != sz(u)) {
    throw ShapeError("dense: bias length " + std::to_string(b.size()) + " does not match kernel " +
                     w.shape().str());
  }
  BasicTensor<T> y(Shape{n_rows, u});
  for (int r = 0; r < n_rows; ++r) {
    T* __restrict acc = y.data().data() + sz(r) * sz(u);
    std::copy(b.begin(), b.end(), acc);
    const T* xr = x.data().data() + sz(r) * sz(f);
    for (int i = 0; i < f; ++i) {
      const T xv = xr[i];
      const T* __restrict wr = w.data().data() + sz(i) * sz(u);
      for (int j = 0; j < u; ++j) acc[j] += xv * wr[j];
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  require_rank(x.shape(), 2, "softmax input");
  const int n_rows = x.dim(0), u = x.dim(1);
  BasicTensor<T> y(x.shape());
  for (int r = 0; r < n_rows; ++r) {
    const T* xr = x.data().data() + sz(r) * sz(u);
    T* yr = y.data().data() + sz(r) * sz(u);
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < u; ++j) mx = std::max(mx, xr[j]);
    T sum = 0;
    for (int j = 0; j < u; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (int j = 0; j < u; ++j) yr[j] /= sum;
  }
  return y;
}

#define LEAFLITE_INSTANTIATE(T)                                                                  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                 std::span<const T>, int, Padding);                             \
  template BasicTensor<T> depthwise_conv2d(const BasicTensor<T>&, const BasicTensor<T>&, int,   \
                                           Padding);                                             \
  template BasicTensor<T> batchnorm(const BasicTensor<T>&, std::span<const T>,                  \
                                    std::span<const T>, std::span<const T>,                     \
                                    std::span<const T>, T);                                     \
  template void batchnorm_inplace(BasicTensor<T>&, std::span<const T>, std::span<const T>,      \
                                  std::span<const T>, std::span<const T>, T);                   \
  template BasicTensor<T> relu6(const BasicTensor<T>&);                                         \
  template void relu6_inplace(BasicTensor<T>&);                                                 \
  template void relu_inplace(BasicTensor<T>&);                                                  \
  template BasicTensor<T> residual_add(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                               \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                std::span<const T>);                                            \
  template BasicTensor<T> softmax(const BasicTensor<T>&);

LEAFLITE_INSTANTIATE(float)
LEAFLITE_INSTANTIATE(double)

#undef LEAFLITE_INSTANTIATE

}  // namespace leaflite::ops
