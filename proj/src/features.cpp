#include "leaflite/features.hpp"

#include <algorithm>

namespace leaflite {

std::vector<int> FeatureProvider::labels(std::span<const std::size_t> items) const {
  std::vector<int> out;
  out.reserve(items.size());
  for (std::size_t i : items) out.push_back(label(i));
  return out;
}

InMemoryFeatures::InMemoryFeatures(Tensor rows, std::vector<int> labels,
                                   SplitAssignment assignment, int classes)
    : rows_(std::move(rows)), labels_(std::move(labels)), assignment_(std::move(assignment)),
      classes_(classes) {
  if (rows_.rank() != 2 || static_cast<std::size_t>(rows_.dim(0)) != labels_.size() ||
      labels_.size() != assignment_.split_of.size()) {
    throw ShapeError("in-memory features: " + rows_.shape().str() + " rows, " +
                     std::to_string(labels_.size()) + " labels, " +
                     std::to_string(assignment_.split_of.size()) + " split entries");
  }
  for (int y : labels_) {
    if (y < 0 || y >= classes_) throw ShapeError("label " + std::to_string(y) + " out of range");
  }
}

std::string InMemoryFeatures::describe(std::size_t item) const {
  return "row " + std::to_string(item);
}

Tensor InMemoryFeatures::features(Split, std::span<const std::size_t> items, int) {
  const int f = rows_.dim(1);
  Tensor out(Shape{static_cast<int>(items.size()), f});
  for (std::size_t r = 0; r < items.size(); ++r) {
    const auto src = rows_.data().subspan(items[r] * static_cast<std::size_t>(f),
                                          static_cast<std::size_t>(f));
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(f)));
  }
  return out;
}

RandomStream augment_stream(std::uint64_t seed, Split split, int pass, const std::string& path) {
  return RandomStream(derive_seed(seed, {hash_string("augment"), static_cast<std::uint64_t>(split),
                                         static_cast<std::uint64_t>(pass), hash_string(path)}));
}

ImageFeatureProvider::ImageFeatureProvider(const DatasetIndex& index,
                                           const SplitAssignment& assignment,
                                           const ModelGraph& graph, const WeightStore& weights,
                                           PipelineOptions options)
    : index_(index), assignment_(assignment), graph_(graph), weights_(weights),
      options_(std::move(options)) {
  options_.augment.validate();
  if (options_.apply_clahe) options_.clahe.validate();
  if (assignment_.split_of.size() != index_.entries.size()) {
    throw ShapeError("split assignment does not match the dataset index");
  }
}

bool ImageFeatureProvider::augments(Split split) const {
  if (!options_.augment.active()) return false;
  switch (split) {
    case Split::kTrain: return true;
    case Split::kVal: return options_.augment_val;
    case Split::kTest: return options_.augment_test;
  }
  return false;
}

Image ImageFeatureProvider::prepared_image(Split split, std::size_t item, int pass) const {
  Image img = read_image(index_.absolute(item));
  if (options_.apply_clahe) img = clahe(img, options_.clahe);
  if (augments(split)) {
    RandomStream rng = augment_stream(options_.seed, split, pass, index_.entries.at(item).path);
    img = random_augment(img, options_.augment, rng);
  }
  return img;
}

Tensor ImageFeatureProvider::features(Split split, std::span<const std::size_t> items, int pass) {
  const int f = graph_.feature_dim();
  const bool cacheable = !augments(split) || split == Split::kVal;
  // Validation uses one draw for the whole run.
  if (split == Split::kVal) pass = 0;
  Tensor out(Shape{static_cast<int>(items.size()), f});
  for (std::size_t r = 0; r < items.size(); ++r) {
    const std::size_t item = items[r];
    const std::vector<float>* row = nullptr;
    std::vector<float> fresh;
    if (cacheable) {
      auto it = cache_.find(item);
      if (it != cache_.end()) row = &it->second;
    }
    if (row == nullptr) {
      const Tensor input = to_input_tensor(prepared_image(split, item, pass), graph_.input_side);
      const Tensor feat = forward_features(graph_, weights_, input);
      ++backbone_calls_;
      fresh = feat.values();
      if (cacheable) {
        row = &cache_.emplace(item, std::move(fresh)).first->second;
      } else {
        row = &fresh;
      }
    }
    std::copy(row->begin(), row->end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(f)));
  }
  return out;
}

}  // namespace leaflite
