#include "leaflite/mobilenet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "leaflite/random.hpp"
#include "leaflite/tensor_ops.hpp"

namespace leaflite {
namespace {

const std::array<const char*, 4> kBnSuffixes = {"gamma", "beta", "moving_mean",
                                                "moving_variance"};

struct GraphBuilder {
  ModelGraph graph;
  int h = 0, w = 0, channels = 3;

  int add(LayerSpec layer) {
    layer.in_h = h;
    layer.in_w = w;
    if (layer.kind == LayerKind::kConv || layer.kind == LayerKind::kDepthwise) {
      const auto gh = ops::conv_geometry(h, layer.kernel, layer.stride, ops::Padding::kSame);
      const auto gw = ops::conv_geometry(w, layer.kernel, layer.stride, ops::Padding::kSame);
      h = gh.out;
      w = gw.out;
    }
    if (layer.in_channels == 0) layer.in_channels = channels;
    if (layer.out_channels == 0) layer.out_channels = layer.in_channels;
    channels = layer.out_channels;
    layer.out_h = h;
    layer.out_w = w;
    graph.layers.push_back(std::move(layer));
    return static_cast<int>(graph.layers.size()) - 1;
  }

  void conv(const std::string& name, int kernel, int stride, int out, int block) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kConv;
    l.kernel = kernel;
    l.stride = stride;
    l.out_channels = out;
    l.block = block;
    add(std::move(l));
  }
  void depthwise(const std::string& name, int stride, int block) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::kDepthwise;
    l.kernel = 3;
    l.stride = stride;
    l.block = block;
    add(std::move(l));
  }
  void simple(const std::string& name, LayerKind kind, int block) {
    LayerSpec l;
    l.name = name;
    l.kind = kind;
    l.block = block;
    add(std::move(l));
  }
};

std::set<int> skip_sources(const ModelGraph& graph) {
  std::set<int> out;
  for (const auto& l : graph.layers) {
    if (l.kind == LayerKind::kAdd) out.insert(l.skip_from);
  }
  return out;
}

std::span<const float> param(const WeightStore& ws, const std::string& name) {
  return ws.get(name).data();
}

// Per-channel biased mean and variance over every position of an NHWC tensor.
void channel_moments(const Tensor& x, std::vector<float>& mean, std::vector<float>& var) {
  const auto c = static_cast<std::size_t>(x.dim(x.rank() - 1));
  const std::size_t rows = x.size() / c;
  const float* d = x.data().data();
  std::vector<double> m(c, 0.0), s2(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) m[ch] += d[r * c + ch];
  }
  for (double& v : m) v /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double dv = d[r * c + ch] - m[ch];
      s2[ch] += dv * dv;
    }
  }
  mean.resize(c);
  var.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    mean[ch] = static_cast<float>(m[ch]);
    var[ch] = static_cast<float>(s2[ch] / static_cast<double>(rows));
  }
}

// Walks the graph. With `calibrate` set, each BN layer first overwrites its
// running statistics with the moments of its current input.
Tensor run_graph(const ModelGraph& graph, WeightStore& weights, const Tensor& batch,
                 bool calibrate) {
  if (batch.rank() != 4 || batch.dim(1) != graph.input_side ||
      batch.dim(2) != graph.input_side || batch.dim(3) != 3) {
    throw ShapeError("backbone input must be N x " + std::to_string(graph.input_side) + " x " +
                     std::to_string(graph.input_side) + " x 3, got " + batch.shape().str());
  }
  if (batch.dim(0) < 1) throw ShapeError("backbone input batch is empty");

  const std::set<int> keep = skip_sources(graph);
  std::vector<Tensor> saved(graph.layers.size());
  Tensor x = batch;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const LayerSpec& l = graph.layers[i];
    switch (l.kind) {
      case LayerKind::kConv:
        x = ops::conv2d<float>(x, weights.get(l.name + "/kernel"), {}, l.stride,
                               ops::Padding::kSame);
        break;
      case LayerKind::kDepthwise:
        x = ops::depthwise_conv2d<float>(x, weights.get(l.name + "/depthwise_kernel"), l.stride,
                                         ops::Padding::kSame);
        break;
      case LayerKind::kBatchNorm:
        if (calibrate) {
          std::vector<float> mean, var;
          channel_moments(x, mean, var);
          weights.set(l.name + "/moving_mean", Tensor(Shape{l.out_channels}, std::move(mean)));
          weights.set(l.name + "/moving_variance", Tensor(Shape{l.out_channels}, std::move(var)));
        }
        ops::batchnorm_inplace<float>(x, param(weights, l.name + "/gamma"),
                                      param(weights, l.name + "/beta"),
                                      param(weights, l.name + "/moving_mean"),
                                      param(weights, l.name + "/moving_variance"),
                                      kBackboneBnEpsilon);
        break;
      case LayerKind::kRelu6:
        ops::relu6_inplace(x);
        break;
      case LayerKind::kAdd:
        x = ops::residual_add(x, l.skip_from < 0 ? batch : saved[static_cast<std::size_t>(l.skip_from)]);
        break;
    }
    if (keep.count(static_cast<int>(i))) saved[i] = x;
  }
  return x;
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kDepthwise: return "depthwise";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kRelu6: return "relu6";
    case LayerKind::kAdd: return "add";
  }
  return "?";
}

std::vector<std::pair<std::string, Shape>> LayerSpec::parameters() const {
  switch (kind) {
    case LayerKind::kConv:
      return {{name + "/kernel", Shape{kernel, kernel, in_channels, out_channels}}};
    case LayerKind::kDepthwise:
      return {{name + "/depthwise_kernel", Shape{kernel, kernel, in_channels}}};
    case LayerKind::kBatchNorm: {
      std::vector<std::pair<std::string, Shape>> out;
      for (const char* s : kBnSuffixes) out.emplace_back(name + "/" + s, Shape{out_channels});
      return out;
    }
    case LayerKind::kRelu6:
    case LayerKind::kAdd:
      return {};
  }
  return {};
}

int ModelGraph::feature_map_side() const {
  return layers.empty() ? 0 : layers.back().out_h;
}

std::vector<std::pair<std::string, Shape>> ModelGraph::parameters() const {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& l : layers) {
    for (auto& p : l.parameters()) out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> ModelGraph::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& [name, shape] : parameters()) out.push_back(name);
  return out;
}

ModelGraph build_mobilenet_v2(int input_side) {
  if (input_side < 32) {
    throw ShapeError("input side must be at least 32, got " + std::to_string(input_side));
  }
  GraphBuilder b;
  b.graph.input_side = input_side;
  b.h = b.w = input_side;

  b.conv("Conv1", 3, 2, kStemChannels, -1);
  b.simple("bn_Conv1", LayerKind::kBatchNorm, -1);
  b.simple("Conv1_relu", LayerKind::kRelu6, -1);

  int block = 0;
  for (const auto& seq : kMobileNetV2Sequences) {
    for (int r = 0; r < seq.repeats; ++r, ++block) {
      const int stride = r == 0 ? seq.first_stride : 1;
      const int in = b.channels;
      const int block_input = static_cast<int>(b.graph.layers.size()) - 1;
      const std::string prefix =
          block == 0 ? std::string("expanded_conv_") : "block_" + std::to_string(block) + "_";
      if (seq.expansion != 1) {
        b.conv(prefix + "expand", 1, 1, in * seq.expansion, block);
        b.simple(prefix + "expand_BN", LayerKind::kBatchNorm, block);
        b.simple(prefix + "expand_relu", LayerKind::kRelu6, block);
      }
      b.depthwise(prefix + "depthwise", stride, block);
      b.simple(prefix + "depthwise_BN", LayerKind::kBatchNorm, block);
      b.simple(prefix + "depthwise_relu", LayerKind::kRelu6, block);
      b.conv(prefix + "project", 1, 1, seq.out_channels, block);
      b.simple(prefix + "project_BN", LayerKind::kBatchNorm, block);
      if (stride == 1 && in == seq.out_channels) {
        LayerSpec add;
        add.name = prefix + "add";
        add.kind = LayerKind::kAdd;
        add.block = block;
        add.skip_from = block_input;
        b.add(std::move(add));
      }
    }
  }
  b.graph.block_count = block;

  b.conv("Conv_1", 1, 1, kFeatureDim, -1);
  b.simple("Conv_1_bn", LayerKind::kBatchNorm, -1);
  b.simple("out_relu", LayerKind::kRelu6, -1);
  return b.graph;
}

void validate_backbone_weights(const ModelGraph& graph, const WeightStore& weights) {
  const auto params = graph.parameters();
  std::vector<std::string> names;
  names.reserve(params.size());
  for (const auto& [name, shape] : params) names.push_back(name);
  weights.require(names);
  weights.require_only(names);
  for (const auto& [name, shape] : params) {
    const Tensor& t = weights.get(name);
    if (!(t.shape() == shape)) {
      throw WeightFormatError(WeightErrorCode::kShapeMismatch,
                              name + " is " + t.shape().str() + ", expected " + shape.str());
    }
    if (!all_finite(t)) throw WeightFormatError(WeightErrorCode::kNonFinite, name);
  }
}

Tensor forward_feature_map(const ModelGraph& graph, const WeightStore& weights,
                           const Tensor& batch) {
  // run_graph only writes when calibrating.
  return run_graph(graph, const_cast<WeightStore&>(weights), batch, false);
}

Tensor pool_features(const Tensor& feature_map) {
  const int n = feature_map.dim(0), c = feature_map.dim(3);
  return ops::global_avg_pool(feature_map).reshaped(Shape{n, c});
}

Tensor forward_features(const ModelGraph& graph, const WeightStore& weights, const Tensor& batch) {
  return pool_features(forward_feature_map(graph, weights, batch));
}

WeightStore init_synthetic_backbone(const ModelGraph& graph, std::uint64_t seed,
                                    const Tensor& calibration) {
  WeightStore ws;
  for (const auto& l : graph.layers) {
    RandomStream rng(derive_seed(seed, {hash_string(l.name)}));
    for (const auto& [name, shape] : l.parameters()) {
      Tensor t(shape);
      if (l.kind == LayerKind::kConv || l.kind == LayerKind::kDepthwise) {
        const int fan_in = l.kind == LayerKind::kConv ? l.kernel * l.kernel * l.in_channels
                                                      : l.kernel * l.kernel;
        const double sd = std::sqrt(2.0 / fan_in);
        for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, sd));
      } else if (name.ends_with("/gamma") || name.ends_with("/moving_variance")) {
        for (float& v : t.data()) v = 1.0f;
      }
      ws.set(name, std::move(t));
    }
  }
  run_graph(graph, ws, calibration, true);
  return ws;
}

Tensor default_calibration_batch(int side, int count, std::uint64_t seed) {
  Tensor batch(Shape{count, side, side, 3});
  RandomStream rng(derive_seed(seed, {hash_string("calibration")}));
  constexpr int kWaves = 6;
  for (int n = 0; n < count; ++n) {
    for (int c = 0; c < 3; ++c) {
      std::array<double, kWaves> fx{}, fy{}, ph{}, amp{};
      for (int k = 0; k < kWaves; ++k) {
        fx[k] = rng.uniform(-8.0, 8.0);
        fy[k] = rng.uniform(-8.0, 8.0);
        ph[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        amp[k] = rng.uniform(0.1, 0.4);
      }
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          double v = 0.0;
          for (int k = 0; k < kWaves; ++k) {
            v += amp[k] * std::sin(2.0 * std::numbers::pi * (fx[k] * x + fy[k] * y) / side + ph[k]);
          }
          batch.at(n, y, x, c) = static_cast<float>(std::clamp(v, -1.0, 1.0));
        }
      }
    }
  }
  return batch;
}

}  // namespace leaflite
