#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "leaflite/augment.hpp"
#include "leaflite/dataset.hpp"
#include "leaflite/imageproc.hpp"
#include "leaflite/mobilenet.hpp"
#include "leaflite/tensor.hpp"

namespace leaflite {

// Supplies backbone features for dataset items. `pass` selects the
// augmentation draw: the training epoch, or the run number in repeated
// evaluation.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;

  virtual const SplitAssignment& assignment() const = 0;
  virtual int feature_dim() const = 0;
  virtual int classes() const = 0;
  virtual int label(std::size_t item) const = 0;
  virtual std::string describe(std::size_t item) const = 0;

  // items.size() x feature_dim.
  virtual Tensor features(Split split, std::span<const std::size_t> items, int pass) = 0;

  std::vector<int> labels(std::span<const std::size_t> items) const;
};

// Precomputed feature rows, one per item; `pass` is ignored.
class InMemoryFeatures final : public FeatureProvider {
 public:
  InMemoryFeatures(Tensor rows, std::vector<int> labels, SplitAssignment assignment, int classes);

  const SplitAssignment& assignment() const override { return assignment_; }
  int feature_dim() const override { return rows_.dim(1); }
  int classes() const override { return classes_; }
  int label(std::size_t item) const override { return labels_.at(item); }
  std::string describe(std::size_t item) const override;
  Tensor features(Split split, std::span<const std::size_t> items, int pass) override;

 private:
  Tensor rows_;
  std::vector<int> labels_;
  SplitAssignment assignment_;
  int classes_;
};

struct PipelineOptions {
  AugmentConfig augment;
  // Apply CLAHE on load; off when the corpus was enhanced offline.
  bool apply_clahe = false;
  ClaheParams clahe;
  std::uint64_t seed = 0;
  // Augment the validation split (with one fixed draw per run).
  bool augment_val = true;
  // Augment the test split.
  bool augment_test = true;
};

// decode -> [CLAHE] -> augment -> resize/normalize -> backbone -> pool.
//
// Items whose features cannot change between passes (augmentation off, or the
// validation split, whose draw is fixed per run) are computed once and cached.
class ImageFeatureProvider final : public FeatureProvider {
 public:
  ImageFeatureProvider(const DatasetIndex& index, const SplitAssignment& assignment,
                       const ModelGraph& graph, const WeightStore& weights,
                       PipelineOptions options);

  const SplitAssignment& assignment() const override { return assignment_; }
  int feature_dim() const override { return graph_.feature_dim(); }
  int classes() const override { return static_cast<int>(index_.class_names.size()); }
  int label(std::size_t item) const override { return index_.entries.at(item).class_id; }
  std::string describe(std::size_t item) const override { return index_.entries.at(item).path; }
  Tensor features(Split split, std::span<const std::size_t> items, int pass) override;

  // The exact image fed to the backbone for (split, item, pass).
  Image prepared_image(Split split, std::size_t item, int pass) const;
  bool augments(Split split) const;

  std::size_t backbone_calls() const noexcept { return backbone_calls_; }

 private:
  const DatasetIndex& index_;
  const SplitAssignment& assignment_;
  const ModelGraph& graph_;
  const WeightStore& weights_;
  PipelineOptions options_;
  std::map<std::size_t, std::vector<float>> cache_;
  std::size_t backbone_calls_ = 0;
};

// Stream for one augmentation draw.
RandomStream augment_stream(std::uint64_t seed, Split split, int pass, const std::string& path);

}  // namespace leaflite
