#include "leaflite/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <numbers>

#include "leaflite/random.hpp"

namespace leaflite {
namespace fs = std::filesystem;

namespace {

struct Lesion {
  double x, y, r;
};

using Rgb = std::array<double, 3>;

Rgb lesion_color(int class_id) {
  static constexpr std::array<Rgb, 6> palette = {{
      {110, 62, 28},    // brown
      {225, 205, 60},   // yellow
      {35, 30, 25},     // near-black
      {205, 190, 110},  // tan
      {150, 40, 40},    // rust
      {90, 110, 40},    // olive
  }};
  return palette[static_cast<std::size_t>(class_id - 1) % palette.size()];
}

}  // namespace

std::string synthetic_class_name(int class_id) { return "class_" + std::to_string(class_id); }

Image synthesize_leaf(int class_id, std::uint64_t seed, const SyntheticLeafOptions& o) {
  if (o.side < 16) throw UsageError("synthetic leaf side must be >= 16");
  if (class_id < 0 || class_id >= o.classes) {
    throw UsageError("synthetic class " + std::to_string(class_id) + " out of range");
  }
  RandomStream rng(derive_seed(seed, {hash_string("leaf"), static_cast<std::uint64_t>(class_id)}));
  const double s = o.side;
  const double cx = s * rng.uniform(0.45, 0.55);
  const double cy = s * rng.uniform(0.45, 0.55);
  const double ax = s * rng.uniform(0.30, 0.38);
  const double ay = s * rng.uniform(0.20, 0.28);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const Rgb leaf = {rng.uniform(40, 70), rng.uniform(120, 160), rng.uniform(30, 60)};
  const Rgb background = [&] {
    const double g = rng.uniform(170, 200);
    return Rgb{g, g, g - 4};
  }();
  const double light = rng.uniform(o.low_light, 1.0);

  std::vector<Lesion> lesions;
  Rgb spot{};
  if (class_id > 0) {
    spot = lesion_color(class_id);
    const int count = 6 + 3 * ((class_id - 1) % 4);
    const double radius = s * (0.06 + 0.015 * ((class_id - 1) % 3));
    for (int i = 0; i < count; ++i) {
      // Uniform in the inner part of the ellipse.
      const double rr = 0.75 * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double u = rr * std::cos(phi) * ax, v = rr * std::sin(phi) * ay;
      lesions.push_back({cx + u * ct - v * st, cy + u * st + v * ct,
                         radius * rng.uniform(0.8, 1.25)});
    }
  }

  Image img(o.side, o.side);
  for (int y = 0; y < o.side; ++y) {
    for (int x = 0; x < o.side; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (dx * ct + dy * st) / ax, v = (-dx * st + dy * ct) / ay;
      Rgb c = background;
      if (u * u + v * v <= 1.0) {
        c = leaf;
        // Midrib.
        if (std::fabs(v) < 0.03 && std::fabs(u) < 0.9) c = {leaf[0] + 40, leaf[1] + 40, leaf[2] + 20};
        for (const auto& l : lesions) {
          const double ex = x + 0.5 - l.x, ey = y + 0.5 - l.y;
          if (ex * ex + ey * ey <= l.r * l.r) c = spot;
        }
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double val = c[static_cast<std::size_t>(ch)] * light + rng.normal(0.0, o.noise);
        img.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(val, 0.0, 255.0)));
      }
    }
  }
  return img;
}

std::vector<fs::path> write_synthetic_corpus(const fs::path& dir, const SyntheticCorpusConfig& config) {
  if (config.per_class < 1) throw UsageError("per_class must be >= 1");
  std::vector<fs::path> out;
  for (int k = 0; k < config.leaf.classes; ++k) {
    const fs::path class_dir = dir / synthetic_class_name(k);
    fs::create_directories(class_dir);
    for (int i = 0; i < config.per_class; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "leaf_%03d.png", i);
      const std::uint64_t seed =
          derive_seed(config.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)});
      write_png(class_dir / name, synthesize_leaf(k, seed, config.leaf));
      out.push_back(class_dir / name);
    }
  }
  return out;
}

std::vector<bool> leaf_mask(const Image& img) {
  const int w = img.width(), h = img.height();
  if (w == 0 || h == 0) return {};
  // Background colour: per-channel median of the border pixels.
  std::array<std::vector<int>, 3> border;
  for (int x = 0; x < w; ++x) {
    for (int ch = 0; ch < 3; ++ch) {
      border[static_cast<std::size_t>(ch)].push_back(img.at(x, 0, ch));
      border[static_cast<std::size_t>(ch)].push_back(img.at(x, h - 1, ch));
    }
  }
  for (int y = 1; y + 1 < h; ++y) {
    for (int ch = 0; ch < 3; ++ch) {
      border[static_cast<std::size_t>(ch)].push_back(img.at(0, y, ch));
      border[static_cast<std::size_t>(ch)].push_back(img.at(w - 1, y, ch));
    }
  }
  std::array<int, 3> bg{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    auto& v = border[ch];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    bg[ch] = v[v.size() / 2];
  }
  const int threshold = std::max(12, *std::max_element(bg.begin(), bg.end()) / 4);
  std::vector<bool> mask(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int diff = 0;
      for (int ch = 0; ch < 3; ++ch) {
        diff = std::max(diff, std::abs(img.at(x, y, ch) - bg[static_cast<std::size_t>(ch)]));
      }
      mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] =
          diff > threshold;
    }
  }
  return mask;
}

}  // namespace leaflite
