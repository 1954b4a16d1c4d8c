#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "leaflite/bundle.hpp"
#include "leaflite/head.hpp"
#include "leaflite/image.hpp"
#include "leaflite/mobilenet.hpp"

namespace leaflite {

struct LayerCost {
  std::string name;
  std::string kind;
  std::int64_t params = 0;     // all stored values, BN running statistics included
  std::int64_t trainable = 0;  // BN: gamma and beta only
  std::int64_t macs = 0;       // multiply-accumulates for one input
  std::int64_t add_flops = 0;  // residual additions
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::int64_t backbone_params = 0, backbone_trainable = 0;
  std::int64_t head_params = 0, head_trainable = 0;
  std::int64_t total_params = 0;
  std::int64_t backbone_macs = 0, head_macs = 0, total_macs = 0;
  std::int64_t add_flops = 0;
  // 2 x total_params, the accounting used by the published comparison tables.
  std::int64_t param_flops = 0;
  double param_mflops() const { return static_cast<double>(param_flops) / 1e6; }
  // Serialized size, when a bundle was measured.
  std::int64_t size_bytes = -1;
  double size_mb() const { return static_cast<double>(size_bytes) / (1024.0 * 1024.0); }

  std::string to_text() const;
  // layer,kind,params,trainable,macs
  std::string to_csv() const;
};

// Per-layer costs of the backbone (shape-propagated at its input side) and
// a head with `classes` outputs.
CostReport cost_report(const ModelGraph& graph, const HeadConfig& head);

// Serialized bytes of the bundle's weight files and manifest.
std::int64_t bundle_size_bytes(const std::filesystem::path& bundle_dir);

// MB = bytes / 2^20.
double model_size_mb(const std::filesystem::path& bundle_dir);

// ReLU(sum_k alpha_k A_k) over an h x w x C map (batch 1), row-major h x w.
std::vector<float> gradcam_map(const Tensor& activations, std::span<const float> alpha);

// Bilinear resize of a row-major map (half-pixel centers, clamped).
std::vector<float> upsample_map(std::span<const float> map, int in_w, int in_h, int out_w,
                                int out_h);

struct Heatmap {
  int target_class = 0;
  int map_side = 0;                // side of the coarse map (8 at input 256)
  std::vector<float> coarse;       // map_side^2, normalized to [0, 1]
  int side = 0;                    // output side
  std::vector<float> values;       // side^2, normalized to [0, 1]
  std::vector<float> probabilities;
  std::vector<float> alpha;        // channel weights
};

// Target layer: the final 1x1 conv output after BN and ReLU6. Channel weights
// are the spatial mean of d(logit_c)/dA, i.e. (1 / (h w)) d(logit_c)/d(pooled).
Heatmap gradcam(const ModelGraph& graph, const WeightStore& backbone, const Head& head,
                const Tensor& input, int target_class);
Heatmap gradcam(const Bundle& bundle, const Image& img, int target_class);

// Grey-level rendering of a heatmap.
Image heatmap_image(const Heatmap& h);
// Jet-coloured heatmap blended over `img` (resized to the heatmap side).
Image heatmap_overlay(const Image& img, const Heatmap& h, double alpha = 0.45);

}  // namespace leaflite
