#include "leaflite/analysis.hpp"

#include <cstdio>

namespace leaflite {
namespace fs = std::filesystem;

namespace {

std::int64_t i64(int v) { return static_cast<std::int64_t>(v); }

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

LayerCost dense_cost(const std::string& name, int in, int out) {
  LayerCost c;
  c.name = name;
  c.kind = "dense";
  c.params = c.trainable = i64(in) * out + out;
  c.macs = i64(in) * out;
  return c;
}

LayerCost bn_cost(const std::string& name, int channels) {
  LayerCost c;
  c.name = name;
  c.kind = "batchnorm";
  c.params = 4 * i64(channels);
  c.trainable = 2 * i64(channels);
  return c;
}

}  // namespace

CostReport cost_report(const ModelGraph& graph, const HeadConfig& head) {
  CostReport r;
  for (const auto& l : graph.layers) {
    LayerCost c;
    c.name = l.name;
    c.kind = to_string(l.kind);
    const std::int64_t out_positions = i64(l.out_h) * l.out_w;
    switch (l.kind) {
      case LayerKind::kConv:
        c.params = c.trainable = i64(l.kernel) * l.kernel * l.in_channels * l.out_channels;
        c.macs = c.params * out_positions;
        break;
      case LayerKind::kDepthwise:
        c.params = c.trainable = i64(l.kernel) * l.kernel * l.in_channels;
        c.macs = c.params * out_positions;
        break;
      case LayerKind::kBatchNorm:
        c = bn_cost(l.name, l.out_channels);
        break;
      case LayerKind::kRelu6:
        break;
      case LayerKind::kAdd:
        c.add_flops = out_positions * l.out_channels;
        break;
    }
    r.backbone_params += c.params;
    r.backbone_trainable += c.trainable;
    r.backbone_macs += c.macs;
    r.add_flops += c.add_flops;
    r.layers.push_back(std::move(c));
  }

  const std::vector<LayerCost> head_layers = {
      bn_cost("head_bn1", head.feature_dim),
      dense_cost("head_dense1", head.feature_dim, kHeadHidden1),
      dense_cost("head_dense2", kHeadHidden1, kHeadHidden2),
      bn_cost("head_bn2", kHeadHidden2),
      dense_cost("head_out", kHeadHidden2, head.classes),
  };
  for (const auto& c : head_layers) {
    r.head_params += c.params;
    r.head_trainable += c.trainable;
    r.head_macs += c.macs;
    r.layers.push_back(c);
  }
  r.total_params = r.backbone_params + r.head_params;
  r.total_macs = r.backbone_macs + r.head_macs;
  r.param_flops = 2 * r.total_params;
  return r;
}

std::int64_t bundle_size_bytes(const fs::path& bundle_dir) {
  std::int64_t total = 0;
  for (const char* name : {kBundleBackboneFile, kBundleHeadFile, kBundleManifestFile}) {
    std::error_code ec;
    const auto n = fs::file_size(bundle_dir / name, ec);
    if (ec) throw IoError("cannot stat " + (bundle_dir / name).string() + ": " + ec.message());
    total += static_cast<std::int64_t>(n);
  }
  return total;
}

double model_size_mb(const fs::path& bundle_dir) {
  return static_cast<double>(bundle_size_bytes(bundle_dir)) / (1024.0 * 1024.0);
}

std::string CostReport::to_text() const {
  char buf[256];
  std::string out;
  out += pad("layer", 28, true) + pad("kind", 11, true) + pad("params", 12) +
         pad("trainable", 12) + pad("MACs", 14) + "\n";
  for (const auto& l : layers) {
    out += pad(l.name, 28, true) + pad(l.kind, 11, true) + pad(std::to_string(l.params), 12) +
           pad(std::to_string(l.trainable), 12) + pad(std::to_string(l.macs), 14) + "\n";
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "backbone parameters: %lld (trainable %lld)\n",
                static_cast<long long>(backbone_params), static_cast<long long>(backbone_trainable));
  out += buf;
  std::snprintf(buf, sizeof buf, "head parameters: %lld (trainable %lld)\n",
                static_cast<long long>(head_params), static_cast<long long>(head_trainable));
  out += buf;
  std::snprintf(buf, sizeof buf, "total parameters: %lld\n", static_cast<long long>(total_params));
  out += buf;
  std::snprintf(buf, sizeof buf, "FLOPs (2 x parameters convention): %lld = %.3f MFLOPs\n",
                static_cast<long long>(param_flops), param_mflops());
  out += buf;
  std::snprintf(buf, sizeof buf, "true MACs per image: %lld (backbone %lld, head %lld)\n",
                static_cast<long long>(total_macs), static_cast<long long>(backbone_macs),
                static_cast<long long>(head_macs));
  out += buf;
  std::snprintf(buf, sizeof buf, "residual-add FLOPs per image: %lld\n",
                static_cast<long long>(add_flops));
  out += buf;
  if (size_bytes >= 0) {
    std::snprintf(buf, sizeof buf, "serialized size: %lld bytes = %.2f MB\n",
                  static_cast<long long>(size_bytes), size_mb());
    out += buf;
  }
  return out;
}

std::string CostReport::to_csv() const {
  std::string out = "layer,kind,params,trainable,macs\n";
  for (const auto& l : layers) {
    out += l.name + "," + l.kind + "," + std::to_string(l.params) + "," +
           std::to_string(l.trainable) + "," + std::to_string(l.macs) + "\n";
  }
  return out;
}

}  // namespace leaflite
