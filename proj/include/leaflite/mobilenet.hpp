#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "leaflite/tensor.hpp"
#include "leaflite/weights.hpp"

namespace leaflite {

// One inverted-residual sequence: `repeats` blocks, the first with stride
// `first_stride`, the rest with stride 1.
struct BottleneckSpec {
  int expansion;
  int out_channels;
  int repeats;
  int first_stride;
};

inline constexpr std::array<BottleneckSpec, 7> kMobileNetV2Sequences{{
    {1, 16, 1, 1},
    {6, 24, 2, 2},
    {6, 32, 3, 2},
    {6, 64, 4, 2},
    {6, 96, 3, 1},
    {6, 160, 3, 2},
    {6, 320, 1, 1},
}};

inline constexpr int kStemChannels = 32;
inline constexpr int kFeatureDim = 1280;
inline constexpr int kDefaultInputSide = 256;
inline constexpr float kBackboneBnEpsilon = 1e-3f;

enum class LayerKind {
  kConv,       // 3x3 stem or 1x1 pointwise, no bias
  kDepthwise,  // 3x3 per-channel
  kBatchNorm,
  kRelu6,
  kAdd,        // residual: current + output of `skip_from`
};

const char* to_string(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int kernel = 1;
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;
  int block = -1;      // bottleneck index 0..16, -1 for stem and top
  int skip_from = -1;  // kAdd only: layer index whose output is added, -1 = graph input
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;

  // (parameter name, shape) in canonical order.
  std::vector<std::pair<std::string, Shape>> parameters() const;
};

// Frozen MobileNetV2 feature extractor, width multiplier 1.0.
struct ModelGraph {
  int input_side = kDefaultInputSide;
  std::vector<LayerSpec> layers;
  int block_count = 0;

  int feature_dim() const { return kFeatureDim; }
  // Spatial side of the final 1x1 conv map.
  int feature_map_side() const;
  std::vector<std::pair<std::string, Shape>> parameters() const;
  std::vector<std::string> parameter_names() const;
};

ModelGraph build_mobilenet_v2(int input_side = kDefaultInputSide);

// Throws WeightFormatError on missing names, unexpected names or shape
// mismatches, and FormatError on non-finite values.
void validate_backbone_weights(const ModelGraph& graph, const WeightStore& weights);

// N x S x S x 3 in [-1, 1] -> N x s x s x 1280 after the final BN + ReLU6.
Tensor forward_feature_map(const ModelGraph& graph, const WeightStore& weights,
                           const Tensor& batch);

// N x S x S x 3 -> N x 1280 (global-average-pooled feature map).
Tensor forward_features(const ModelGraph& graph, const WeightStore& weights, const Tensor& batch);

Tensor pool_features(const Tensor& feature_map);

// Deterministic stand-in for pretrained weights: He-normal kernels, identity
// BN, then BN running statistics calibrated layer by layer on
// `calibration` (N x S x S x 3) so every BN output is roughly standardized.
WeightStore init_synthetic_backbone(const ModelGraph& graph, std::uint64_t seed,
                                    const Tensor& calibration);

// Calibration inputs used by init_synthetic_backbone when none are supplied:
// `count` smooth random colour fields in [-1, 1].
Tensor default_calibration_batch(int side, int count, std::uint64_t seed);

}  // namespace leaflite
