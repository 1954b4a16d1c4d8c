#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaflite/features.hpp"
#include "leaflite/head.hpp"

namespace leaflite {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes);
  ConfusionMatrix(int classes, std::vector<std::int64_t> counts);

  int classes() const noexcept { return classes_; }
  std::int64_t& at(int truth, int predicted);
  std::int64_t at(int truth, int predicted) const;
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int predicted) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          int classes);

// 100 * trace / total.
double accuracy(const ConfusionMatrix& cm);

// Zero denominators yield 0.
std::vector<double> precision_per_class(const ConfusionMatrix& cm);
std::vector<double> recall_per_class(const ConfusionMatrix& cm);
std::vector<double> f1_per_class(const ConfusionMatrix& cm);
double macro_precision(const ConfusionMatrix& cm);
double macro_recall(const ConfusionMatrix& cm);
// Mean of per-class F1, not F1 of the macro precision and recall.
double macro_f1(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0, tpr = 0, threshold = 0;
};

struct RocCurve {
  bool defined = false;  // false when the class has no positive or no negative sample
  std::size_t positives = 0, negatives = 0;
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0;
};

// One threshold per distinct score, descending; tied scores move together.
RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive);

// One-vs-rest curve per class from N x K probabilities.
std::vector<RocCurve> roc_auc(const Tensor& probs, std::span<const int> labels);

// Argmax per row; ties go to the lowest class id.
std::vector<int> argmax_rows(const Tensor& probs);

enum class RocSource { kRaw, kAugmented };

struct EvalReport {
  std::vector<std::string> class_names;
  ConfusionMatrix cm;  // pooled over all runs
  std::vector<double> precision, recall, f1;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double accuracy_percent = 0;  // of the pooled matrix
  std::vector<RocCurve> roc;
  RocSource roc_source = RocSource::kRaw;

  std::vector<double> run_accuracies;  // percent, one per run
  double mean_accuracy = 0, std_accuracy = 0, min_accuracy = 0, max_accuracy = 0;

  std::string to_text() const;
  // class,threshold,fpr,tpr
  std::string roc_csv() const;
  // run,accuracy
  std::string runs_csv() const;
};

// Fills per-class and macro metrics from `cm`.
void fill_metrics(EvalReport& report);

struct RepeatedEvalConfig {
  int runs = 100;
  RocSource roc_source = RocSource::kRaw;
  std::size_t chunk = 64;
};

// Run r scores the split with augmentation pass r. Mean, min and max are over
// runs; std is the population standard deviation.
EvalReport repeated_eval(const Head& head, FeatureProvider& provider,
                         FeatureProvider* raw_provider, Split split,
                         const std::vector<std::string>& class_names,
                         const RepeatedEvalConfig& cfg);

}  // namespace leaflite
