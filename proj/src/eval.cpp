#include "leaflite/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>

namespace leaflite {
namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(sz(classes) * sz(classes), 0) {
  if (classes < 1) throw UsageError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(int classes, std::vector<std::int64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (classes < 1 || counts_.size() != sz(classes) * sz(classes)) {
    throw ShapeError("confusion matrix needs " + std::to_string(classes) + "^2 counts");
  }
  for (auto c : counts_) {
    if (c < 0) throw UsageError("confusion matrix counts must be non-negative");
  }
}

std::int64_t& ConfusionMatrix::at(int truth, int predicted) {
  return counts_.at(sz(truth) * sz(classes_) + sz(predicted));
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  return counts_.at(sz(truth) * sz(classes_) + sz(predicted));
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int c = 0; c < classes_; ++c) t += at(c, c);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
  std::int64_t s = 0;
  for (int t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          int classes) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes || predictions[i] < 0 ||
        predictions[i] >= classes) {
      throw ShapeError("confusion: class id out of range at position " + std::to_string(i));
    }
    ++cm.at(labels[i], predictions[i]);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw UsageError("accuracy of an empty confusion matrix");
  return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::vector<double> precision_per_class(const ConfusionMatrix& cm) {
  std::vector<double> out(sz(cm.classes()));
  for (int c = 0; c < cm.classes(); ++c) out[sz(c)] = ratio(cm.at(c, c), cm.col_sum(c));
  return out;
}

std::vector<double> recall_per_class(const ConfusionMatrix& cm) {
  std::vector<double> out(sz(cm.classes()));
  for (int c = 0; c < cm.classes(); ++c) out[sz(c)] = ratio(cm.at(c, c), cm.row_sum(c));
  return out;
}

std::vector<double> f1_per_class(const ConfusionMatrix& cm) {
  const auto p = precision_per_class(cm);
  const auto r = recall_per_class(cm);
  std::vector<double> out(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    out[c] = p[c] + r[c] == 0.0 ? 0.0 : 2.0 * p[c] * r[c] / (p[c] + r[c]);
  }
  return out;
}

double macro_precision(const ConfusionMatrix& cm) { return mean_of(precision_per_class(cm)); }
double macro_recall(const ConfusionMatrix& cm) { return mean_of(recall_per_class(cm)); }
double macro_f1(const ConfusionMatrix& cm) { return mean_of(f1_per_class(cm)); }

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) {
    throw ShapeError("roc: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(positive.size()) + " labels");
  }
  RocCurve curve;
  for (bool p : positive) (p ? curve.positives : curve.negatives) += 1;
  if (curve.positives == 0 || curve.negatives == 0) return curve;
  curve.defined = true;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double P = static_cast<double>(curve.positives);
  const double N = static_cast<double>(curve.negatives);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const RocPoint next{static_cast<double>(fp) / N, static_cast<double>(tp) / P, s};
    const RocPoint& prev = curve.points.back();
    curve.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) * 0.5;
    curve.points.push_back(next);
  }
  return curve;
}

std::vector<int> argmax_rows(const Tensor& probs) {
  std::vector<int> out(sz(probs.dim(0)));
  for (int r = 0; r < probs.dim(0); ++r) {
    int best = 0;
    for (int j = 1; j < probs.dim(1); ++j) {
      if (probs.at(r, j) > probs.at(r, best)) best = j;
    }
    out[sz(r)] = best;
  }
  return out;
}

std::vector<RocCurve> roc_auc(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || sz(probs.dim(0)) != labels.size()) {
    throw ShapeError("roc_auc: " + probs.shape().str() + " scores for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<RocCurve> out;
  std::vector<double> scores(labels.size());
  const auto pos = std::make_unique<bool[]>(labels.size());
  for (int c = 0; c < probs.dim(1); ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      scores[i] = probs.at(static_cast<int>(i), c);
      pos[i] = labels[i] == c;
    }
    out.push_back(roc_curve(scores, std::span<const bool>(pos.get(), labels.size())));
  }
  return out;
}

void fill_metrics(EvalReport& r) {
  r.precision = precision_per_class(r.cm);
  r.recall = recall_per_class(r.cm);
  r.f1 = f1_per_class(r.cm);
  r.macro_precision = macro_precision(r.cm);
  r.macro_recall = macro_recall(r.cm);
  r.macro_f1 = macro_f1(r.cm);
  r.accuracy_percent = accuracy(r.cm);
}

std::string EvalReport::to_text() const {
  std::string out;
  std::size_t name_w = std::string("Class Label").size();
  for (const auto& n : class_names) name_w = std::max(name_w, n.size());
  name_w += 2;

  out += "runs: " + std::to_string(run_accuracies.size()) + "\n";
  out += "accuracy mean: " + fixed(mean_accuracy, 4) + " %\n";
  out += "accuracy std: " + fixed(std_accuracy, 6) + " % (" + fixed(std_accuracy / 100.0, 8) +
         " as a fraction)\n";
  out += "accuracy min: " + fixed(min_accuracy, 4) + " %\n";
  out += "accuracy max: " + fixed(max_accuracy, 4) + " %\n";
  out += "pooled accuracy: " + fixed(accuracy_percent, 4) + " %\n";
  out += "macro precision: " + fixed(macro_precision, 4) + "\n";
  out += "macro recall: " + fixed(macro_recall, 4) + "\n";
  out += "macro F1: " + fixed(macro_f1, 4) + "\n";
  out += std::string("ROC source: ") + (roc_source == RocSource::kRaw ? "raw" : "augmented") +
         "\n\n";

  out += pad("Class Label", name_w, true) + pad("Sample Count", 14) + pad("Precision", 11) +
         pad("Recall", 9) + pad("F1-Score", 10) + pad("AUC", 9) + "\n";
  const double runs = std::max<double>(1.0, static_cast<double>(run_accuracies.size()));
  for (int c = 0; c < cm.classes(); ++c) {
    const std::string name = sz(c) < class_names.size() ? class_names[sz(c)] : std::to_string(c);
    const double per_run = static_cast<double>(cm.row_sum(c)) / runs;
    const std::string count = per_run == std::floor(per_run) ? std::to_string(static_cast<std::int64_t>(per_run))
                                                             : fixed(per_run, 2);
    std::string auc = "absent";
    if (sz(c) < roc.size() && roc[sz(c)].defined) auc = fixed(roc[sz(c)].auc, 4);
    out += pad(name, name_w, true) + pad(count, 14) + pad(fixed(precision[sz(c)], 4), 11) +
           pad(fixed(recall[sz(c)], 4), 9) + pad(fixed(f1[sz(c)], 4), 10) + pad(auc, 9) + "\n";
  }

  out += "\nconfusion matrix (rows = true, columns = predicted, pooled over runs)\n";
  for (int t = 0; t < cm.classes(); ++t) {
    for (int p = 0; p < cm.classes(); ++p) out += pad(std::to_string(cm.at(t, p)), 8);
    out += "\n";
  }
  return out;
}

std::string EvalReport::roc_csv() const {
  std::string out = "class,threshold,fpr,tpr\n";
  for (std::size_t c = 0; c < roc.size(); ++c) {
    if (!roc[c].defined) continue;
    for (const auto& p : roc[c].points) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", c, p.threshold, p.fpr, p.tpr);
      out += buf;
    }
  }
  return out;
}

std::string EvalReport::runs_csv() const {
  std::string out = "run,accuracy\n";
  for (std::size_t i = 0; i < run_accuracies.size(); ++i) {
    out += std::to_string(i) + "," + fixed(run_accuracies[i], 6) + "\n";
  }
  return out;
}

EvalReport repeated_eval(const Head& head, FeatureProvider& provider,
                         FeatureProvider* raw_provider, Split split,
                         const std::vector<std::string>& class_names,
                         const RepeatedEvalConfig& cfg) {
  if (cfg.runs < 1) throw UsageError("repeated evaluation needs at least one run");
  const std::vector<std::size_t> items = provider.assignment().members(split);
  if (items.empty()) throw UsageError(std::string("split ") + to_string(split) + " is empty");
  const std::vector<int> labels = provider.labels(items);
  const int k = head.classes();

  auto score = [&](FeatureProvider& src, int pass) {
    Tensor probs(Shape{static_cast<int>(items.size()), k});
    for (std::size_t i = 0; i < items.size(); i += cfg.chunk) {
      const std::span<const std::size_t> part(items.data() + i,
                                              std::min(cfg.chunk, items.size() - i));
      const Tensor p = head.predict(src.features(split, part, pass));
      std::copy(p.data().begin(), p.data().end(),
                probs.data().begin() + static_cast<std::ptrdiff_t>(i * sz(k)));
    }
    return probs;
  };

  EvalReport r;
  r.class_names = class_names;
  r.cm = ConfusionMatrix(k);
  r.roc_source = cfg.roc_source;
  std::vector<float> pooled_scores;
  std::vector<int> pooled_labels;
  for (int run = 0; run < cfg.runs; ++run) {
    const Tensor probs = score(provider, run);
    const ConfusionMatrix cm = confusion(argmax_rows(probs), labels, k);
    r.run_accuracies.push_back(accuracy(cm));
    r.cm += cm;
    if (cfg.roc_source == RocSource::kAugmented) {
      pooled_scores.insert(pooled_scores.end(), probs.data().begin(), probs.data().end());
      pooled_labels.insert(pooled_labels.end(), labels.begin(), labels.end());
    }
  }
  if (cfg.roc_source == RocSource::kAugmented) {
    const Tensor all(Shape{static_cast<int>(pooled_labels.size()), k}, std::move(pooled_scores));
    r.roc = roc_auc(all, pooled_labels);
  } else {
    FeatureProvider& raw = raw_provider != nullptr ? *raw_provider : provider;
    r.roc = roc_auc(score(raw, 0), labels);
  }

  fill_metrics(r);
  r.mean_accuracy = mean_of(r.run_accuracies);
  double ss = 0.0;
  for (double a : r.run_accuracies) ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
  r.std_accuracy = std::sqrt(ss / static_cast<double>(r.run_accuracies.size()));
  r.min_accuracy = *std::min_element(r.run_accuracies.begin(), r.run_accuracies.end());
  r.max_accuracy = *std::max_element(r.run_accuracies.begin(), r.run_accuracies.end());
  return r;
}

}  // namespace leaflite
