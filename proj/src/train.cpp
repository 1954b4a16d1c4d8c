#include "leaflite/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace leaflite {
namespace {

template <typename T>
int argmax_row(const BasicTensor<T>& probs, int row) {
  int best = 0;
  for (int j = 1; j < probs.dim(1); ++j) {
    if (probs.at(row, j) > probs.at(row, best)) best = j;
  }
  return best;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (max_epochs < 1) throw UsageError("max epochs must be at least 1");
  if (!(initial_lr > 0.0)) throw UsageError("initial learning rate must be positive");
  if (!(min_delta >= 0.0)) throw UsageError("min delta must be non-negative");
  if (early_stop_patience < 1) throw UsageError("early-stop patience must be at least 1");
  if (lr_patience < 1) throw UsageError("lr patience must be at least 1");
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw UsageError("lr factor must be in (0, 1)");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must be in [0, 1)");
  }
}

template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || static_cast<std::size_t>(probs.dim(0)) != labels.size()) {
    throw ShapeError("cross_entropy: " + probs.shape().str() + " probabilities for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("cross_entropy: empty batch");
  double sum = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= probs.dim(1)) throw ShapeError("label " + std::to_string(y) + " out of range");
    const double p = static_cast<double>(probs.at(static_cast<int>(r), y));
    sum -= std::log(std::max(p, 1e-12));
  }
  return sum / static_cast<double>(labels.size());
}

template <typename T>
void adam_step(std::span<BasicTensor<T>* const> params,
               std::span<const BasicTensor<T>* const> grads, AdamState<T>& state, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
  const T eps = static_cast<T>(state.epsilon);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    BasicTensor<T>& p = *params[i];
    const BasicTensor<T>& g = *grads[i];
    if (!(p.shape() == g.shape()) || !(state.m[i].shape() == p.shape())) {
      throw ShapeError("adam: parameter " + p.shape().str() + " vs gradient " + g.shape().str());
    }
    T* pm = state.m[i].data().data();
    T* pv = state.v[i].data().data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      pm[k] = b1 * pm[k] + (T{1} - b1) * g[k];
      pv[k] = b2 * pv[k] + (T{1} - b2) * g[k] * g[k];
      const T m_hat = pm[k] / c1;
      const T v_hat = pv[k] / c2;
      p[k] -= step * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

PlateauSchedule::PlateauSchedule(const TrainConfig& cfg)
    : min_delta_(cfg.min_delta), lr_factor_(cfg.lr_factor), lr_patience_(cfg.lr_patience),
      stop_patience_(cfg.early_stop_patience), lr_(cfg.initial_lr),
      best_significant_(-std::numeric_limits<double>::infinity()),
      best_checkpoint_(-std::numeric_limits<double>::infinity()) {}

PlateauSchedule::Outcome PlateauSchedule::observe(double val_accuracy) {
  Outcome o;
  o.lr_used = lr_;
  if (first_ || val_accuracy > best_checkpoint_) {
    best_checkpoint_ = val_accuracy;
    o.checkpoint = true;
  }
  if (first_ || val_accuracy - best_significant_ > min_delta_) {
    best_significant_ = val_accuracy;
    patient_run_ = 0;
    lr_run_ = 0;
  } else {
    o.patient = true;
    ++patient_run_;
    ++lr_run_;
    if (lr_run_ >= lr_patience_) {
      lr_ *= lr_factor_;
      lr_run_ = 0;
      o.lr_decayed = true;
    }
    if (patient_run_ >= stop_patience_) o.stop = true;
  }
  first_ = false;
  o.patient_run = patient_run_;
  return o;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr,patient\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
           format_double(e.train_accuracy) + "," + format_double(e.val_loss) + "," +
           format_double(e.val_accuracy) + "," + format_double(e.lr) + "," +
           (e.patient ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<std::vector<std::size_t>> training_batches(const SplitAssignment& assignment,
                                                       std::size_t batch_size, int epoch,
                                                       std::uint64_t seed) {
  auto batches = make_batches(assignment, Split::kTrain, batch_size, epoch, seed);
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

SplitScore evaluate_split(const Head& head, FeatureProvider& provider, Split split, int pass,
                          std::size_t chunk) {
  const std::vector<std::size_t> items = provider.assignment().members(split);
  if (items.empty()) throw UsageError(std::string("split ") + to_string(split) + " is empty");
  SplitScore s;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < items.size(); i += chunk) {
    const std::span<const std::size_t> part(items.data() + i, std::min(chunk, items.size() - i));
    const Tensor probs = head.predict(provider.features(split, part, pass));
    const std::vector<int> labels = provider.labels(part);
    loss_sum += cross_entropy(probs, labels) * static_cast<double>(part.size());
    for (std::size_t r = 0; r < part.size(); ++r) {
      if (argmax_row(probs, static_cast<int>(r)) == labels[r]) ++correct;
    }
  }
  s.count = items.size();
  s.loss = loss_sum / static_cast<double>(items.size());
  s.accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
  return s;
}

TrainResult train_head(const Head& init, FeatureProvider& provider, const TrainConfig& cfg,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  if (init.config().feature_dim != provider.feature_dim() ||
      init.classes() != provider.classes()) {
    throw ShapeError("head expects " + std::to_string(init.config().feature_dim) + " features and " +
                     std::to_string(init.classes()) + " classes; data has " +
                     std::to_string(provider.feature_dim()) + " and " +
                     std::to_string(provider.classes()));
  }
  if (provider.assignment().count(Split::kTrain) < 2 && !init.config().freeze_bn) {
    throw UsageError("training split needs at least 2 samples for batch statistics");
  }
  if (provider.assignment().count(Split::kVal) == 0) {
    throw UsageError("validation split is empty");
  }

  TrainResult result;
  Head head = init;
  head.config().dropout_rate = cfg.dropout_rate;
  result.best = head;
  PlateauSchedule schedule(cfg);
  AdamState<float> adam;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const double lr = schedule.lr();
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    const auto batches = training_batches(provider.assignment(), cfg.batch_size, epoch, cfg.seed);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& items = batches[b];
      const Tensor x = provider.features(Split::kTrain, items, epoch);
      const std::vector<int> labels = provider.labels(items);
      RandomStream dropout(derive_seed(cfg.seed, {hash_string("dropout"),
                                                  static_cast<std::uint64_t>(epoch), b}));
      Head::Cache cache;
      const Tensor probs = head.forward(x, HeadMode::kTrain, &dropout, &cache);
      const double loss = cross_entropy(probs, labels);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + " (first item " + provider.describe(items.front()) +
                           ")");
      }
      const HeadParams grads = head.backward(cache, labels);
      const auto p = head.params().trainable();
      const auto g = grads.trainable();
      adam_step<float>(std::span<Tensor* const>(p), std::span<const Tensor* const>(g), adam, lr);

      loss_sum += loss * static_cast<double>(items.size());
      for (std::size_t r = 0; r < items.size(); ++r) {
        if (argmax_row(probs, static_cast<int>(r)) == labels[r]) ++correct;
      }
      seen += items.size();
    }
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    const SplitScore val = evaluate_split(head, provider, Split::kVal, 0);
    rec.val_loss = val.loss;
    rec.val_accuracy = val.accuracy;

    const auto outcome = schedule.observe(val.accuracy);
    rec.lr = outcome.lr_used;
    rec.patient = outcome.patient;
    rec.checkpoint = outcome.checkpoint;
    if (outcome.checkpoint) {
      result.best = head;
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (outcome.stop) break;
  }
  result.last = head;
  return result;
}

template double cross_entropy<float>(const BasicTensor<float>&, std::span<const int>);
template double cross_entropy<double>(const BasicTensor<double>&, std::span<const int>);
template void adam_step<float>(std::span<BasicTensor<float>* const>,
                               std::span<const BasicTensor<float>* const>, AdamState<float>&,
                               double);
template void adam_step<double>(std::span<BasicTensor<double>* const>,
                                std::span<const BasicTensor<double>* const>, AdamState<double>&,
                                double);

}  // namespace leaflite
