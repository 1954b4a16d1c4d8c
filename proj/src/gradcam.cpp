#include <algorithm>
#include <array>
#include <cmath>

#include "leaflite/analysis.hpp"

namespace leaflite {

namespace {

void normalize_by_max(std::vector<float>& v) {
  float top = 0.0f;
  for (float x : v) top = std::max(top, x);
  if (top <= 0.0f) {
    std::fill(v.begin(), v.end(), 0.0f);
    return;
  }
  for (float& x : v) x /= top;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Piecewise-linear jet colormap.
std::array<double, 3> jet(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto ramp = [](double x) { return std::clamp(1.5 - std::fabs(x), 0.0, 1.0); };
  return {ramp(4.0 * t - 3.0), ramp(4.0 * t - 2.0), ramp(4.0 * t - 1.0)};
}

}  // namespace

std::vector<float> gradcam_map(const Tensor& activations, std::span<const float> alpha) {
  if (activations.rank() != 4 || activations.dim(0) != 1) {
    throw ShapeError("gradcam_map expects a 1 x h x w x C map, got " + activations.shape().str());
  }
  const int h = activations.dim(1), w = activations.dim(2), c = activations.dim(3);
  if (alpha.size() != static_cast<std::size_t>(c)) {
    throw ShapeError("gradcam_map: " + std::to_string(alpha.size()) + " weights for " +
                     std::to_string(c) + " channels");
  }
  std::vector<float> out(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = 0; k < c; ++k) {
        s += static_cast<double>(alpha[static_cast<std::size_t>(k)]) * activations.at(0, y, x, k);
      }
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] =
          static_cast<float>(std::max(0.0, s));
    }
  }
  return out;
}

std::vector<float> upsample_map(std::span<const float> map, int in_w, int in_h, int out_w,
                                int out_h) {
  if (in_w <= 0 || in_h <= 0 || out_w <= 0 || out_h <= 0 ||
      map.size() != static_cast<std::size_t>(in_w) * static_cast<std::size_t>(in_h)) {
    throw ShapeError("upsample_map: bad extents");
  }
  std::vector<float> out(static_cast<std::size_t>(out_w) * static_cast<std::size_t>(out_h));
  const double sx = static_cast<double>(in_w) / out_w;
  const double sy = static_cast<double>(in_h) / out_h;
  auto at = [&](int x, int y) {
    return static_cast<double>(
        map[static_cast<std::size_t>(y) * static_cast<std::size_t>(in_w) + static_cast<std::size_t>(x)]);
  };
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double tx = fx - x0;
      const double top = at(x0, y0) * (1 - tx) + at(x1, y0) * tx;
      const double bottom = at(x0, y1) * (1 - tx) + at(x1, y1) * tx;
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(out_w) + static_cast<std::size_t>(x)] =
          static_cast<float>(top * (1 - ty) + bottom * ty);
    }
  }
  return out;
}

Heatmap gradcam(const ModelGraph& graph, const WeightStore& backbone, const Head& head,
                const Tensor& input, int target_class) {
  if (input.rank() != 4 || input.dim(0) != 1) {
    throw ShapeError("gradcam expects a single 1 x S x S x 3 input, got " + input.shape().str());
  }
  if (target_class < 0 || target_class >= head.classes()) {
    throw UsageError("gradcam: class " + std::to_string(target_class) + " out of range");
  }
  const Tensor fmap = forward_feature_map(graph, backbone, input);
  const int h = fmap.dim(1), w = fmap.dim(2), c = fmap.dim(3);
  const Tensor pooled = pool_features(fmap);

  Head::Cache cache;
  const Tensor probs = head.predict(pooled, &cache);
  Tensor d_logits(Shape{1, head.classes()});
  d_logits[static_cast<std::size_t>(target_class)] = 1.0f;
  Tensor d_pooled;
  head.backward_logits(cache, d_logits, &d_pooled);

  Heatmap out;
  out.target_class = target_class;
  out.probabilities = probs.values();
  out.alpha.resize(static_cast<std::size_t>(c));
  const float inv_area = 1.0f / static_cast<float>(h * w);
  for (int k = 0; k < c; ++k) {
    out.alpha[static_cast<std::size_t>(k)] = d_pooled[static_cast<std::size_t>(k)] * inv_area;
  }
  out.map_side = h;
  out.coarse = gradcam_map(fmap, out.alpha);
  normalize_by_max(out.coarse);
  out.side = input.dim(1);
  out.values = upsample_map(out.coarse, w, h, input.dim(2), input.dim(1));
  normalize_by_max(out.values);
  return out;
}

Heatmap gradcam(const Bundle& bundle, const Image& img, int target_class) {
  return gradcam(bundle.graph, bundle.backbone, bundle.head, prepare_input(bundle, img),
                 target_class);
}

Image heatmap_image(const Heatmap& h) {
  Image out(h.side, h.side);
  for (int y = 0; y < h.side; ++y) {
    for (int x = 0; x < h.side; ++x) {
      const std::uint8_t v = to_byte(h.values[static_cast<std::size_t>(y * h.side + x)]);
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = v;
    }
  }
  return out;
}

Image heatmap_overlay(const Image& img, const Heatmap& h, double alpha) {
  const Image base = (img.width() == h.side && img.height() == h.side)
                         ? img
                         : resize_image(img, h.side, h.side);
  Image out(h.side, h.side);
  for (int y = 0; y < h.side; ++y) {
    for (int x = 0; x < h.side; ++x) {
      const auto color = jet(h.values[static_cast<std::size_t>(y * h.side + x)]);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1.0 - alpha) * base.at(x, y, ch) / 255.0 + alpha * color[static_cast<std::size_t>(ch)];
        out.at(x, y, ch) = to_byte(v);
      }
    }
  }
  return out;
}

}  // namespace leaflite
