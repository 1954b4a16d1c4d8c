#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "leaflite/random.hpp"
#include "leaflite/tensor.hpp"
#include "leaflite/weights.hpp"

namespace leaflite {

inline constexpr int kHeadHidden1 = 128;
inline constexpr int kHeadHidden2 = 64;
inline constexpr int kDefaultClassCount = 10;

struct HeadConfig {
  int feature_dim = 1280;
  int classes = kDefaultClassCount;
  double dropout_rate = 0.5;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;
  // Train mode normalizes with running statistics and leaves them untouched.
  bool freeze_bn = false;

  void validate() const;
};

enum class HeadMode { kTrain, kInfer };

// Parameters of BN -> Dense(128)/ReLU -> Dropout -> Dense(64)/ReLU -> BN ->
// Dense(classes) -> softmax. Dense kernels are (in, out).
template <typename T>
struct BasicHeadParams {
  BasicTensor<T> bn1_gamma, bn1_beta, bn1_moving_mean, bn1_moving_variance;
  BasicTensor<T> dense1_kernel, dense1_bias;
  BasicTensor<T> dense2_kernel, dense2_bias;
  BasicTensor<T> bn2_gamma, bn2_beta, bn2_moving_mean, bn2_moving_variance;
  BasicTensor<T> out_kernel, out_bias;

  static constexpr std::size_t kTrainableCount = 10;
  static constexpr std::size_t kTensorCount = 14;

  // Zero-filled tensors with the head's shapes.
  static BasicHeadParams zeros(int feature_dim, int classes);

  // Canonical names, matching the weight-file layout.
  static const std::array<const char*, kTensorCount>& names();
  static const std::array<const char*, kTrainableCount>& trainable_names();

  std::array<BasicTensor<T>*, kTensorCount> all();
  std::array<const BasicTensor<T>*, kTensorCount> all() const;
  std::array<BasicTensor<T>*, kTrainableCount> trainable();
  std::array<const BasicTensor<T>*, kTrainableCount> trainable() const;

  std::size_t parameter_count() const;
};

// Intermediates of one forward pass, consumed by backward().
template <typename T>
struct BasicHeadCache {
  HeadMode mode = HeadMode::kInfer;
  bool batch_stats = false;  // BN layers normalized with batch moments
  int batch = 0;
  BasicTensor<T> mean1, var1;      // BN1 batch moments (biased variance), train mode only
  BasicTensor<T> xhat1, inv_std1;  // BN1 normalized input, per-channel 1/sqrt(var+eps)
  BasicTensor<T> a1;               // BN1 output
  BasicTensor<T> z1;               // dense1 pre-activation
  BasicTensor<T> mask;             // dropout multipliers (0 or 1/(1-rate))
  BasicTensor<T> h1;               // after ReLU and dropout
  BasicTensor<T> z2;               // dense2 pre-activation
  BasicTensor<T> mean2, var2;
  BasicTensor<T> xhat2, inv_std2;
  BasicTensor<T> a2;               // BN2 output
  BasicTensor<T> logits;
  BasicTensor<T> probs;
};

template <typename T>
class BasicHead {
 public:
  using Params = BasicHeadParams<T>;
  using Cache = BasicHeadCache<T>;

  BasicHead() = default;
  BasicHead(HeadConfig config, Params params);

  // Glorot-uniform dense kernels, zero biases, identity BN.
  static BasicHead initialize(HeadConfig config, std::uint64_t seed);

  const HeadConfig& config() const noexcept { return config_; }
  HeadConfig& config() noexcept { return config_; }
  const Params& params() const noexcept { return params_; }
  Params& params() noexcept { return params_; }
  int classes() const noexcept { return config_.classes; }

  // features: N x feature_dim -> N x classes probabilities. Train mode draws
  // the dropout mask from `stream` (required when dropout_rate > 0) and,
  // unless BN is frozen, normalizes with batch moments and updates the running
  // statistics (unbiased variance, so N >= 2).
  BasicTensor<T> forward(const BasicTensor<T>& features, HeadMode mode,
                         RandomStream* stream = nullptr, Cache* cache = nullptr);

  // Infer-mode forward; const.
  BasicTensor<T> predict(const BasicTensor<T>& features, Cache* cache = nullptr) const;

  // Gradients of mean categorical cross-entropy. Running statistics in the
  // returned struct are zero.
  Params backward(const Cache& cache, std::span<const int> labels) const;

  // Backpropagates an arbitrary upstream gradient on the logits. When
  // `d_features` is non-null it receives the gradient w.r.t. the input.
  Params backward_logits(const Cache& cache, const BasicTensor<T>& d_logits,
                         BasicTensor<T>* d_features = nullptr) const;

  WeightStore to_weights() const;
  static BasicHead from_weights(const WeightStore& store, HeadConfig config);

 private:
  BasicTensor<T> run(const BasicTensor<T>& features, HeadMode mode, RandomStream* stream,
                     Cache& cache) const;
  void update_running_stats(const Cache& cache);

  HeadConfig config_;
  Params params_;
};

using HeadParams = BasicHeadParams<float>;
using Head = BasicHead<float>;

}  // namespace leaflite
