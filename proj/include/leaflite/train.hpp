#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "leaflite/features.hpp"
#include "leaflite/head.hpp"

namespace leaflite {

struct TrainConfig {
  std::size_t batch_size = 16;
  int max_epochs = 1000;
  double initial_lr = 1e-5;
  double min_delta = 1e-4;  // validation-accuracy improvement that counts
  int early_stop_patience = 10;
  int lr_patience = 4;
  double lr_factor = 0.1;
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Mean of -log(max(p_correct, 1e-12)).
template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels);

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::int64_t step = 0;
  std::vector<BasicTensor<T>> m, v;  // mirror the parameter list, created lazily
};

// t += 1; m = b1 m + (1 - b1) g; v = b2 v + (1 - b2) g^2;
// p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
template <typename T>
void adam_step(std::span<BasicTensor<T>* const> params,
               std::span<const BasicTensor<T>* const> grads, AdamState<T>& state, double lr);

// Reduce-on-plateau and early stopping driven by validation accuracy.
//
// An epoch is patient unless accuracy beats the best significant value by
// more than min_delta; a significant improvement resets both counters. The
// learning rate is multiplied by lr_factor after every lr_patience consecutive
// patient epochs (that counter then restarts) and training stops after
// early_stop_patience consecutive patient epochs. Checkpoints follow any
// strict improvement of the best accuracy seen.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(const TrainConfig& cfg);

  struct Outcome {
    double lr_used = 0;
    bool patient = false;
    bool checkpoint = false;
    bool lr_decayed = false;
    bool stop = false;
    int patient_run = 0;
  };

  Outcome observe(double val_accuracy);
  double lr() const noexcept { return lr_; }

 private:
  double min_delta_, lr_factor_;
  int lr_patience_, stop_patience_;
  double lr_;
  double best_significant_;
  double best_checkpoint_;
  bool first_ = true;
  int patient_run_ = 0;
  int lr_run_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0, train_accuracy = 0;
  double val_loss = 0, val_accuracy = 0;
  double lr = 0;
  bool patient = false;
  bool checkpoint = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;

  // epoch,train_loss,train_acc,val_loss,val_acc,lr,patient
  std::string to_csv() const;
};

struct TrainResult {
  Head best;
  Head last;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// TRAIN batches from make_batches; a trailing batch of one sample is merged
// into the previous batch because batch statistics need two rows.
std::vector<std::vector<std::size_t>> training_batches(const SplitAssignment& assignment,
                                                       std::size_t batch_size, int epoch,
                                                       std::uint64_t seed);

struct SplitScore {
  double loss = 0;
  double accuracy = 0;
  std::size_t count = 0;
};

// Infer-mode loss and accuracy over one split.
SplitScore evaluate_split(const Head& head, FeatureProvider& provider, Split split, int pass,
                          std::size_t chunk = 64);

TrainResult train_head(const Head& init, FeatureProvider& provider, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {});

}  // namespace leaflite
