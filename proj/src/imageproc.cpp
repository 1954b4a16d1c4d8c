#include "leaflite/imageproc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace leaflite {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// sRGB primaries, D65 white.
constexpr Mat3 kRgbToXyz = {{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;
constexpr double kKa = 172.30;
constexpr double kKb = 67.20;

Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

const Mat3& xyz_to_rgb() {
  static const Mat3 m = invert(kRgbToXyz);
  return m;
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

// Lookup for the 256 possible gamma-decoded values.
const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return table;
}

HunterLab xyz_to_hunter(double x, double y, double z) {
  const double yr = y / kYn;
  if (yr <= 0.0) return {};
  const double sy = std::sqrt(yr);
  return {100.0 * sy, kKa * (x / kXn - yr) / sy, kKb * (yr - z / kZn) / sy};
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

HunterLab rgb_to_hunter_lab(double r8, double g8, double b8) {
  const double r = srgb_to_linear(r8 / 255.0);
  const double g = srgb_to_linear(g8 / 255.0);
  const double b = srgb_to_linear(b8 / 255.0);
  const auto& m = kRgbToXyz;
  return xyz_to_hunter(m[0][0] * r + m[0][1] * g + m[0][2] * b,
                       m[1][0] * r + m[1][1] * g + m[1][2] * b,
                       m[2][0] * r + m[2][1] * g + m[2][2] * b);
}

LabImage rgb_to_hunter_lab(const Image& img) {
  LabImage lab;
  lab.width = img.width();
  lab.height = img.height();
  const std::size_t n = static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.height());
  lab.L.resize(n);
  lab.a.resize(n);
  lab.b.resize(n);
  const auto& lin = linear_table();
  const auto& m = kRgbToXyz;
  const auto px = img.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = lin[px[3 * i]];
    const double g = lin[px[3 * i + 1]];
    const double b = lin[px[3 * i + 2]];
    const HunterLab h = xyz_to_hunter(m[0][0] * r + m[0][1] * g + m[0][2] * b,
                                      m[1][0] * r + m[1][1] * g + m[1][2] * b,
                                      m[2][0] * r + m[2][1] * g + m[2][2] * b);
    lab.L[i] = static_cast<float>(h.L);
    lab.a[i] = static_cast<float>(h.a);
    lab.b[i] = static_cast<float>(h.b);
  }
  return lab;
}

Image hunter_lab_to_rgb(const LabImage& lab) {
  Image img(lab.width, lab.height);
  const auto& m = xyz_to_rgb();
  auto px = img.pixels();
  for (std::size_t i = 0; i < lab.L.size(); ++i) {
    const double sy = std::max(0.0, static_cast<double>(lab.L[i])) / 100.0;
    const double yr = sy * sy;
    const double x = kXn * (static_cast<double>(lab.a[i]) * sy / kKa + yr);
    const double y = kYn * yr;
    const double z = kZn * (yr - static_cast<double>(lab.b[i]) * sy / kKb);
    for (int c = 0; c < 3; ++c) {
      const auto& row = m[static_cast<std::size_t>(c)];
      const double linear = std::clamp(row[0] * x + row[1] * y + row[2] * z, 0.0, 1.0);
      px[3 * i + static_cast<std::size_t>(c)] = to_u8(255.0 * linear_to_srgb(linear));
    }
  }
  return img;
}

void ClaheParams::validate() const {
  if (tiles_x < 1 || tiles_y < 1) throw UsageError("CLAHE tile grid must be at least 1x1");
  if (!(clip_beta > 0.0)) throw UsageError("CLAHE clip limit must be positive");
  if (bins < 2) throw UsageError("CLAHE needs at least 2 histogram bins");
}

int tile_start(int extent, int parts, int index) {
  return static_cast<int>(static_cast<long long>(extent) * index / parts);
}

double ClahePlan::map_tile(const ClaheTile& t, double l) const {
  const double range = l_max - l_min;
  if (range <= 0.0) return l;
  // Knots: (-0.5, l_min), (k, bin_map[k]) for every bin, (bins - 0.5, l_max).
  const double u = (l - l_min) / range * bins - 0.5;
  if (u <= 0.0) {
    const double f = std::clamp((u + 0.5) / 0.5, 0.0, 1.0);
    return l_min + f * (t.bin_map.front() - l_min);
  }
  if (u >= bins - 1) {
    const double f = std::clamp((u - (bins - 1)) / 0.5, 0.0, 1.0);
    return t.bin_map.back() + f * (l_max - t.bin_map.back());
  }
  const int k = static_cast<int>(u);
  const double f = u - k;
  return t.bin_map[static_cast<std::size_t>(k)] * (1.0 - f) +
         t.bin_map[static_cast<std::size_t>(k + 1)] * f;
}

namespace {

// Neighbouring tile indices and blend weight along one axis. Pixels outside
// the outermost tile centers use that tile alone.
struct AxisBlend {
  int lo = 0, hi = 0;
  double w = 0;
};

AxisBlend axis_blend(int pos, int extent, int parts) {
  auto center = [&](int i) {
    return 0.5 * (tile_start(extent, parts, i) + tile_start(extent, parts, i + 1) - 1);
  };
  const double p = pos;
  if (p <= center(0)) return {0, 0, 0.0};
  if (p >= center(parts - 1)) return {parts - 1, parts - 1, 0.0};
  int i = static_cast<int>(static_cast<long long>(pos) * parts / extent);
  if (center(i) > p) --i;
  while (i + 1 < parts && center(i + 1) <= p) ++i;
  const double c0 = center(i), c1 = center(i + 1);
  return {i, i + 1, (p - c0) / (c1 - c0)};
}

}  // namespace

double ClahePlan::map_pixel(int x, int y, double l) const {
  const AxisBlend bx = axis_blend(x, width, tiles_x);
  const AxisBlend by = axis_blend(y, height, tiles_y);
  const double t00 = map_tile(tile(bx.lo, by.lo), l);
  const double t10 = map_tile(tile(bx.hi, by.lo), l);
  const double t01 = map_tile(tile(bx.lo, by.hi), l);
  const double t11 = map_tile(tile(bx.hi, by.hi), l);
  return (1.0 - by.w) * ((1.0 - bx.w) * t00 + bx.w * t10) +
         by.w * ((1.0 - bx.w) * t01 + bx.w * t11);
}

ClahePlan clahe_plan(const std::vector<float>& lightness, int width, int height,
                     const ClaheParams& params) {
  params.validate();
  if (width < params.tiles_x || height < params.tiles_y) {
    throw ShapeError("image " + std::to_string(width) + "x" + std::to_string(height) +
                     " is smaller than the " + std::to_string(params.tiles_x) + "x" +
                     std::to_string(params.tiles_y) + " CLAHE tile grid");
  }
  ClahePlan plan;
  plan.width = width;
  plan.height = height;
  plan.tiles_x = params.tiles_x;
  plan.tiles_y = params.tiles_y;
  plan.bins = params.bins;
  const auto [mn, mx] = std::minmax_element(lightness.begin(), lightness.end());
  plan.l_min = *mn;
  plan.l_max = *mx;
  const double range = plan.l_max - plan.l_min;
  const auto bins = static_cast<std::size_t>(params.bins);

  plan.tiles.reserve(static_cast<std::size_t>(params.tiles_x * params.tiles_y));
  for (int ty = 0; ty < params.tiles_y; ++ty) {
    for (int tx = 0; tx < params.tiles_x; ++tx) {
      ClaheTile t;
      t.x0 = tile_start(width, params.tiles_x, tx);
      t.x1 = tile_start(width, params.tiles_x, tx + 1);
      t.y0 = tile_start(height, params.tiles_y, ty);
      t.y1 = tile_start(height, params.tiles_y, ty + 1);
      t.raw_histogram.assign(bins, 0.0);
      for (int y = t.y0; y < t.y1; ++y) {
        for (int x = t.x0; x < t.x1; ++x) {
          const double l = lightness[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                                     static_cast<std::size_t>(x)];
          std::size_t k = 0;
          if (range > 0.0) {
            k = std::min(bins - 1, static_cast<std::size_t>((l - plan.l_min) / range *
                                                            static_cast<double>(bins)));
          }
          t.raw_histogram[k] += 1.0;
        }
      }
      const double pixels = static_cast<double>((t.x1 - t.x0) * (t.y1 - t.y0));
      t.clip_limit = params.clip_beta * pixels / static_cast<double>(bins);
      double excess = 0.0;
      t.clipped_histogram.resize(bins);
      for (std::size_t k = 0; k < bins; ++k) {
        const double h = t.raw_histogram[k];
        excess += std::max(0.0, h - t.clip_limit);
        t.clipped_histogram[k] = std::min(h, t.clip_limit);
      }
      t.redistributed = excess / static_cast<double>(bins);
      for (double& h : t.clipped_histogram) h += t.redistributed;

      t.bin_map.resize(bins);
      double before = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double mid = before + 0.5 * t.clipped_histogram[k];
        t.bin_map[k] = plan.l_min + range * mid / pixels;
        before += t.clipped_histogram[k];
      }
      plan.tiles.push_back(std::move(t));
    }
  }
  return plan;
}

LabImage clahe_lab(const LabImage& lab, const ClaheParams& params) {
  const ClahePlan plan = clahe_plan(lab.L, lab.width, lab.height, params);
  LabImage out = lab;
  for (int y = 0; y < lab.height; ++y) {
    for (int x = 0; x < lab.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(lab.width) +
                            static_cast<std::size_t>(x);
      out.L[i] = static_cast<float>(std::clamp(plan.map_pixel(x, y, lab.L[i]), 0.0, 100.0));
    }
  }
  return out;
}

Image clahe(const Image& img, const ClaheParams& params) {
  return hunter_lab_to_rgb(clahe_lab(rgb_to_hunter_lab(img), params));
}

std::vector<float> resize_bilinear(const Image& img, int out_w, int out_h) {
  if (img.empty()) throw ShapeError("cannot resize an empty image");
  const int in_w = img.width(), in_h = img.height();
  std::vector<float> out(static_cast<std::size_t>(out_w) * static_cast<std::size_t>(out_h) * 3);
  const double sx_scale = static_cast<double>(in_w) / out_w;
  const double sy_scale = static_cast<double>(in_h) / out_h;

  std::vector<int> x0(static_cast<std::size_t>(out_w)), x1(static_cast<std::size_t>(out_w));
  std::vector<double> fx(static_cast<std::size_t>(out_w));
  for (int x = 0; x < out_w; ++x) {
    const double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(in_w - 1));
    const auto i = static_cast<std::size_t>(x);
    x0[i] = static_cast<int>(sx);
    x1[i] = std::min(x0[i] + 1, in_w - 1);
    fx[i] = sx - x0[i];
  }
  for (int y = 0; y < out_h; ++y) {
    const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const auto i = static_cast<std::size_t>(x);
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0[i], y0, c) * (1.0 - fx[i]) + img.at(x1[i], y0, c) * fx[i];
        const double bot = img.at(x0[i], y1, c) * (1.0 - fx[i]) + img.at(x1[i], y1, c) * fx[i];
        out[(static_cast<std::size_t>(y) * static_cast<std::size_t>(out_w) + i) * 3 +
            static_cast<std::size_t>(c)] = static_cast<float>(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

Tensor to_input_tensor(const Image& img, int side) {
  std::vector<float> values = resize_bilinear(img, side, side);
  for (float& v : values) v = v / 127.5f - 1.0f;
  return Tensor(Shape{1, side, side, 3}, std::move(values));
}

Image resize_image(const Image& img, int out_w, int out_h) {
  const std::vector<float> values = resize_bilinear(img, out_w, out_h);
  std::vector<std::uint8_t> px(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) px[i] = to_u8(values[i]);
  return Image(out_w, out_h, std::move(px));
}

}  // namespace leaflite
