#include "leaflite/head.hpp"

#include <cmath>

#include "leaflite/tensor_ops.hpp"

namespace leaflite {
namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

// a^T b for a: N x F, b: N x U -> F x U.
template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const int n = a.dim(0), f = a.dim(1), u = b.dim(1);
  BasicTensor<T> out(Shape{f, u});
  T* __restrict o = out.data().data();
  for (int r = 0; r < n; ++r) {
    const T* ar = a.data().data() + sz(r) * sz(f);
    const T* br = b.data().data() + sz(r) * sz(u);
    for (int i = 0; i < f; ++i) {
      const T av = ar[i];
      if (av == T{0}) continue;
      T* __restrict orow = o + sz(i) * sz(u);
      for (int j = 0; j < u; ++j) orow[j] += av * br[j];
    }
  }
  return out;
}

// a b^T for a: N x U, b: F x U -> N x F.
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const int n = a.dim(0), u = a.dim(1), f = b.dim(0);
  BasicTensor<T> out(Shape{n, f});
  for (int r = 0; r < n; ++r) {
    const T* __restrict ar = a.data().data() + sz(r) * sz(u);
    for (int i = 0; i < f; ++i) {
      const T* __restrict br = b.data().data() + sz(i) * sz(u);
      T acc{0};
      for (int j = 0; j < u; ++j) acc += ar[j] * br[j];
      out.at(r, i) = acc;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> column_sums(const BasicTensor<T>& a) {
  const int n = a.dim(0), u = a.dim(1);
  BasicTensor<T> out(Shape{u});
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < u; ++j) out[sz(j)] += a.at(r, j);
  }
  return out;
}

struct BnForward {
  bool batch_stats;
  double eps;
};

// Normalizes x (N x C) in place of `out`, filling xhat/inv_std and, with batch
// statistics, the biased batch moments.
template <typename T>
void bn_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                const BasicTensor<T>& moving_mean, const BasicTensor<T>& moving_var,
                BnForward opt, BasicTensor<T>& mean, BasicTensor<T>& var, BasicTensor<T>& xhat,
                BasicTensor<T>& inv_std, BasicTensor<T>& out) {
  const int n = x.dim(0), c = x.dim(1);
  inv_std = BasicTensor<T>(Shape{c});
  if (opt.batch_stats) {
    mean = BasicTensor<T>(Shape{c});
    var = BasicTensor<T>(Shape{c});
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < c; ++j) mean[sz(j)] += x.at(r, j);
    }
    for (int j = 0; j < c; ++j) mean[sz(j)] /= static_cast<T>(n);
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < c; ++j) {
        const T d = x.at(r, j) - mean[sz(j)];
        var[sz(j)] += d * d;
      }
    }
    for (int j = 0; j < c; ++j) var[sz(j)] /= static_cast<T>(n);
  } else {
    mean = moving_mean;
    var = moving_var;
  }
  for (int j = 0; j < c; ++j) {
    if (var[sz(j)] < T{0}) throw NumericError("batchnorm variance is negative");
    inv_std[sz(j)] = T{1} / std::sqrt(var[sz(j)] + static_cast<T>(opt.eps));
  }
  xhat = BasicTensor<T>(Shape{n, c});
  out = BasicTensor<T>(Shape{n, c});
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < c; ++j) {
      const T h = (x.at(r, j) - mean[sz(j)]) * inv_std[sz(j)];
      xhat.at(r, j) = h;
      out.at(r, j) = gamma[sz(j)] * h + beta[sz(j)];
    }
  }
}

template <typename T>
BasicTensor<T> bn_backward(const BasicTensor<T>& dy, const BasicTensor<T>& xhat,
                           const BasicTensor<T>& inv_std, const BasicTensor<T>& gamma,
                           bool batch_stats, BasicTensor<T>& dgamma, BasicTensor<T>& dbeta) {
  const int n = dy.dim(0), c = dy.dim(1);
  dgamma = BasicTensor<T>(Shape{c});
  dbeta = BasicTensor<T>(Shape{c});
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < c; ++j) {
      dgamma[sz(j)] += dy.at(r, j) * xhat.at(r, j);
      dbeta[sz(j)] += dy.at(r, j);
    }
  }
  BasicTensor<T> dx(Shape{n, c});
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < c; ++j) {
      const T g = gamma[sz(j)] * inv_std[sz(j)];
      if (batch_stats) {
        // dbeta = sum(dy), dgamma = sum(dy * xhat).
        dx.at(r, j) = g * (dy.at(r, j) - (dbeta[sz(j)] + xhat.at(r, j) * dgamma[sz(j)]) /
                                             static_cast<T>(n));
      } else {
        dx.at(r, j) = g * dy.at(r, j);
      }
    }
  }
  return dx;
}

template <typename T>
void require_shape(const BasicTensor<T>& t, const Shape& s, const char* name) {
  if (!(t.shape() == s)) {
    throw ShapeError(std::string("head parameter ") + name + " is " + t.shape().str() +
                     ", expected " + s.str());
  }
}

}  // namespace

void HeadConfig::validate() const {
  if (feature_dim < 1) throw UsageError("head feature dimension must be positive");
  if (classes < 2) throw UsageError("head needs at least 2 classes");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must be in [0, 1)");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) {
    throw UsageError("batchnorm momentum must be in [0, 1)");
  }
  if (!(bn_epsilon > 0.0)) throw UsageError("batchnorm epsilon must be positive");
}

template <typename T>
BasicHeadParams<T> BasicHeadParams<T>::zeros(int feature_dim, int classes) {
  BasicHeadParams p;
  for (auto* t : {&p.bn1_gamma, &p.bn1_beta, &p.bn1_moving_mean, &p.bn1_moving_variance}) {
    *t = BasicTensor<T>(Shape{feature_dim});
  }
  p.dense1_kernel = BasicTensor<T>(Shape{feature_dim, kHeadHidden1});
  p.dense1_bias = BasicTensor<T>(Shape{kHeadHidden1});
  p.dense2_kernel = BasicTensor<T>(Shape{kHeadHidden1, kHeadHidden2});
  p.dense2_bias = BasicTensor<T>(Shape{kHeadHidden2});
  for (auto* t : {&p.bn2_gamma, &p.bn2_beta, &p.bn2_moving_mean, &p.bn2_moving_variance}) {
    *t = BasicTensor<T>(Shape{kHeadHidden2});
  }
  p.out_kernel = BasicTensor<T>(Shape{kHeadHidden2, classes});
  p.out_bias = BasicTensor<T>(Shape{classes});
  return p;
}

template <typename T>
const std::array<const char*, BasicHeadParams<T>::kTensorCount>& BasicHeadParams<T>::names() {
  static const std::array<const char*, kTensorCount> n = {
      "head_bn1/gamma",         "head_bn1/beta",          "head_bn1/moving_mean",
      "head_bn1/moving_variance", "head_dense1/kernel",   "head_dense1/bias",
      "head_dense2/kernel",     "head_dense2/bias",       "head_bn2/gamma",
      "head_bn2/beta",          "head_bn2/moving_mean",   "head_bn2/moving_variance",
      "head_out/kernel",        "head_out/bias"};
  return n;
}

template <typename T>
const std::array<const char*, BasicHeadParams<T>::kTrainableCount>&
BasicHeadParams<T>::trainable_names() {
  static const std::array<const char*, kTrainableCount> n = {
      "head_bn1/gamma",   "head_bn1/beta",     "head_dense1/kernel", "head_dense1/bias",
      "head_dense2/kernel", "head_dense2/bias", "head_bn2/gamma",     "head_bn2/beta",
      "head_out/kernel",  "head_out/bias"};
  return n;
}

template <typename T>
std::array<BasicTensor<T>*, BasicHeadParams<T>::kTensorCount> BasicHeadParams<T>::all() {
  return {&bn1_gamma,    &bn1_beta,    &bn1_moving_mean, &bn1_moving_variance, &dense1_kernel,
          &dense1_bias,  &dense2_kernel, &dense2_bias,   &bn2_gamma,           &bn2_beta,
          &bn2_moving_mean, &bn2_moving_variance, &out_kernel, &out_bias};
}

template <typename T>
std::array<const BasicTensor<T>*, BasicHeadParams<T>::kTensorCount> BasicHeadParams<T>::all()
    const {
  return {&bn1_gamma,    &bn1_beta,    &bn1_moving_mean, &bn1_moving_variance, &dense1_kernel,
          &dense1_bias,  &dense2_kernel, &dense2_bias,   &bn2_gamma,           &bn2_beta,
          &bn2_moving_mean, &bn2_moving_variance, &out_kernel, &out_bias};
}

template <typename T>
std::array<BasicTensor<T>*, BasicHeadParams<T>::kTrainableCount> BasicHeadParams<T>::trainable() {
  return {&bn1_gamma,   &bn1_beta,  &dense1_kernel, &dense1_bias, &dense2_kernel,
          &dense2_bias, &bn2_gamma, &bn2_beta,      &out_kernel,  &out_bias};
}

template <typename T>
std::array<const BasicTensor<T>*, BasicHeadParams<T>::kTrainableCount>
BasicHeadParams<T>::trainable() const {
  return {&bn1_gamma,   &bn1_beta,  &dense1_kernel, &dense1_bias, &dense2_kernel,
          &dense2_bias, &bn2_gamma, &bn2_beta,      &out_kernel,  &out_bias};
}

template <typename T>
std::size_t BasicHeadParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : all()) n += t->size();
  return n;
}

template <typename T>
BasicHead<T>::BasicHead(HeadConfig config, Params params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const Params ref = Params::zeros(config_.feature_dim, config_.classes);
  const auto want = ref.all();
  const auto have = params_.all();
  for (std::size_t i = 0; i < Params::kTensorCount; ++i) {
    require_shape(*have[i], want[i]->shape(), Params::names()[i]);
  }
}

template <typename T>
BasicHead<T> BasicHead<T>::initialize(HeadConfig config, std::uint64_t seed) {
  config.validate();
  Params p = Params::zeros(config.feature_dim, config.classes);
  for (auto* t : {&p.bn1_gamma, &p.bn1_moving_variance, &p.bn2_gamma, &p.bn2_moving_variance}) {
    for (T& v : t->data()) v = T{1};
  }
  const std::array<std::pair<BasicTensor<T>*, const char*>, 3> kernels = {{
      {&p.dense1_kernel, "head_dense1/kernel"},
      {&p.dense2_kernel, "head_dense2/kernel"},
      {&p.out_kernel, "head_out/kernel"},
  }};
  for (const auto& [t, name] : kernels) {
    RandomStream rng(derive_seed(seed, {hash_string(name)}));
    const double limit = std::sqrt(6.0 / (t->dim(0) + t->dim(1)));
    for (T& v : t->data()) v = static_cast<T>(rng.uniform(-limit, limit));
  }
  return BasicHead(config, std::move(p));
}

template <typename T>
BasicTensor<T> BasicHead<T>::run(const BasicTensor<T>& features, HeadMode mode,
                                 RandomStream* stream, Cache& c) const {
  if (features.rank() != 2 || features.dim(1) != config_.feature_dim) {
    throw ShapeError("head input must be N x " + std::to_string(config_.feature_dim) + ", got " +
                     features.shape().str());
  }
  const int n = features.dim(0);
  if (n < 1) throw ShapeError("head input batch is empty");
  const bool train = mode == HeadMode::kTrain;
  c.mode = mode;
  c.batch = n;
  c.batch_stats = train && !config_.freeze_bn;
  if (c.batch_stats && n < 2) {
    throw ShapeError("train-mode batchnorm needs at least 2 samples per batch, got 1");
  }
  const BnForward bn{c.batch_stats, config_.bn_epsilon};
  const Params& p = params_;

  bn_forward(features, p.bn1_gamma, p.bn1_beta, p.bn1_moving_mean, p.bn1_moving_variance, bn,
             c.mean1, c.var1, c.xhat1, c.inv_std1, c.a1);
  c.z1 = ops::dense<T>(c.a1, p.dense1_kernel, p.dense1_bias.data());

  c.mask = BasicTensor<T>(c.z1.shape(), T{1});
  if (train && config_.dropout_rate > 0.0) {
    if (stream == nullptr) throw UsageError("train-mode dropout needs a random stream");
    const T keep_scale = static_cast<T>(1.0 / (1.0 - config_.dropout_rate));
    for (T& m : c.mask.data()) {
      m = stream->bernoulli(1.0 - config_.dropout_rate) ? keep_scale : T{0};
    }
  }
  c.h1 = BasicTensor<T>(c.z1.shape());
  for (std::size_t i = 0; i < c.z1.size(); ++i) {
    c.h1[i] = (c.z1[i] > T{0} ? c.z1[i] : T{0}) * c.mask[i];
  }

  c.z2 = ops::dense<T>(c.h1, p.dense2_kernel, p.dense2_bias.data());
  BasicTensor<T> r2 = c.z2;
  ops::relu_inplace(r2);
  bn_forward(r2, p.bn2_gamma, p.bn2_beta, p.bn2_moving_mean, p.bn2_moving_variance, bn, c.mean2,
             c.var2, c.xhat2, c.inv_std2, c.a2);

  c.logits = ops::dense<T>(c.a2, p.out_kernel, p.out_bias.data());
  c.probs = ops::softmax(c.logits);
  return c.probs;
}

template <typename T>
void BasicHead<T>::update_running_stats(const Cache& c) {
  const T m = static_cast<T>(config_.bn_momentum);
  const T unbias = static_cast<T>(c.batch) / static_cast<T>(c.batch - 1);
  auto update = [&](BasicTensor<T>& mm, BasicTensor<T>& mv, const BasicTensor<T>& mean,
                    const BasicTensor<T>& var) {
    for (std::size_t j = 0; j < mm.size(); ++j) {
      mm[j] = m * mm[j] + (T{1} - m) * mean[j];
      mv[j] = m * mv[j] + (T{1} - m) * var[j] * unbias;
    }
  };
  update(params_.bn1_moving_mean, params_.bn1_moving_variance, c.mean1, c.var1);
  update(params_.bn2_moving_mean, params_.bn2_moving_variance, c.mean2, c.var2);
}

template <typename T>
BasicTensor<T> BasicHead<T>::forward(const BasicTensor<T>& features, HeadMode mode,
                                     RandomStream* stream, Cache* cache) {
  Cache local;
  Cache& c = cache != nullptr ? *cache : local;
  BasicTensor<T> probs = run(features, mode, stream, c);
  if (c.batch_stats) update_running_stats(c);
  return probs;
}

template <typename T>
BasicTensor<T> BasicHead<T>::predict(const BasicTensor<T>& features, Cache* cache) const {
  Cache local;
  return run(features, HeadMode::kInfer, nullptr, cache != nullptr ? *cache : local);
}

template <typename T>
BasicHeadParams<T> BasicHead<T>::backward(const Cache& c, std::span<const int> labels) const {
  if (labels.size() != sz(c.batch)) {
    throw ShapeError("backward: " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(c.batch));
  }
  BasicTensor<T> d_logits = c.probs;
  const T inv_n = T{1} / static_cast<T>(c.batch);
  for (int r = 0; r < c.batch; ++r) {
    const int y = labels[sz(r)];
    if (y < 0 || y >= config_.classes) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(config_.classes) + ")");
    }
    d_logits.at(r, y) -= T{1};
  }
  for (T& v : d_logits.data()) v *= inv_n;
  return backward_logits(c, d_logits);
}

template <typename T>
BasicHeadParams<T> BasicHead<T>::backward_logits(const Cache& c, const BasicTensor<T>& d_logits,
                                                 BasicTensor<T>* d_features) const {
  if (!(d_logits.shape() == c.logits.shape())) {
    throw ShapeError("backward: upstream gradient " + d_logits.shape().str() +
                     " does not match logits " + c.logits.shape().str());
  }
  const Params& p = params_;
  Params g = Params::zeros(config_.feature_dim, config_.classes);

  g.out_kernel = matmul_tn(c.a2, d_logits);
  g.out_bias = column_sums(d_logits);
  const BasicTensor<T> d_a2 = matmul_nt(d_logits, p.out_kernel);

  BasicTensor<T> d_z2 = bn_backward(d_a2, c.xhat2, c.inv_std2, p.bn2_gamma, c.batch_stats,
                                    g.bn2_gamma, g.bn2_beta);
  for (std::size_t i = 0; i < d_z2.size(); ++i) {
    if (!(c.z2[i] > T{0})) d_z2[i] = T{0};
  }
  g.dense2_kernel = matmul_tn(c.h1, d_z2);
  g.dense2_bias = column_sums(d_z2);

  BasicTensor<T> d_z1 = matmul_nt(d_z2, p.dense2_kernel);
  for (std::size_t i = 0; i < d_z1.size(); ++i) {
    d_z1[i] = c.z1[i] > T{0} ? d_z1[i] * c.mask[i] : T{0};
  }
  g.dense1_kernel = matmul_tn(c.a1, d_z1);
  g.dense1_bias = column_sums(d_z1);

  const BasicTensor<T> d_a1 = matmul_nt(d_z1, p.dense1_kernel);
  BasicTensor<T> d_x = bn_backward(d_a1, c.xhat1, c.inv_std1, p.bn1_gamma, c.batch_stats,
                                   g.bn1_gamma, g.bn1_beta);
  if (d_features != nullptr) *d_features = std::move(d_x);
  return g;
}

template <typename T>
WeightStore BasicHead<T>::to_weights() const {
  WeightStore ws;
  const auto tensors = params_.all();
  for (std::size_t i = 0; i < Params::kTensorCount; ++i) {
    const BasicTensor<T>& t = *tensors[i];
    std::vector<float> v(t.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<float>(t[k]);
    ws.set(Params::names()[i], Tensor(t.shape(), std::move(v)));
  }
  return ws;
}

template <typename T>
BasicHead<T> BasicHead<T>::from_weights(const WeightStore& store, HeadConfig config) {
  const std::vector<std::string> names(Params::names().begin(), Params::names().end());
  store.require(names);
  store.require_only(names);
  Params p = Params::zeros(config.feature_dim, config.classes);
  const auto tensors = p.all();
  for (std::size_t i = 0; i < Params::kTensorCount; ++i) {
    const Tensor& src = store.get(Params::names()[i]);
    if (!(src.shape() == tensors[i]->shape())) {
      throw WeightFormatError(WeightErrorCode::kShapeMismatch,
                              std::string(Params::names()[i]) + " is " + src.shape().str() +
                                  ", expected " + tensors[i]->shape().str());
    }
    for (std::size_t k = 0; k < src.size(); ++k) (*tensors[i])[k] = static_cast<T>(src[k]);
  }
  return BasicHead(config, std::move(p));
}

template struct BasicHeadParams<float>;
template struct BasicHeadParams<double>;
template class BasicHead<float>;
template class BasicHead<double>;

}  // namespace leaflite
