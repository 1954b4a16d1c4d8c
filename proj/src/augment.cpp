#include "leaflite/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace leaflite {
namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

// Bilinear sample with coordinates clamped to the image (nearest-edge fill).
void sample_bilinear(const Image& img, double sx, double sy, std::uint8_t* out) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width() - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(sx);
  const int y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  for (int c = 0; c < 3; ++c) {
    const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
    const double bot = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
    out[c] = to_u8(top * (1.0 - fy) + bot * fy);
  }
}

}  // namespace

void AugmentConfig::validate() const {
  if (shift_range < 0.0 || shift_range > 0.5) throw UsageError("shift range must be in [0, 0.5]");
  if (rotation_range < 0.0 || rotation_range > 45.0) {
    throw UsageError("rotation range must be in [0, 45] degrees");
  }
  if (shear_range < 0.0 || shear_range > 0.5) throw UsageError("shear range must be in [0, 0.5]");
  if (per_transform_probability < 0.0 || per_transform_probability > 1.0) {
    throw UsageError("per-transform probability must be in [0, 1]");
  }
}

Image shift(const Image& img, double dx_frac, double dy_frac) {
  const int dx = static_cast<int>(std::lround(dx_frac * img.width()));
  const int dy = static_cast<int>(std::lround(dy_frac * img.height()));
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    const int sy = std::clamp(y - dy, 0, img.height() - 1);
    for (int x = 0; x < img.width(); ++x) {
      const int sx = std::clamp(x - dx, 0, img.width() - 1);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  if (degrees == 0.0) return img;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = 0.5 * (img.width() - 1), cy = 0.5 * (img.height() - 1);
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double ux = x - cx, uy = y - cy;
      // Inverse map of the displayed counter-clockwise rotation (y axis down).
      const double sx = cx + ux * cs - uy * sn;
      const double sy = cy + ux * sn + uy * cs;
      sample_bilinear(img, sx, sy, &out.at(x, y, 0));
    }
  }
  return out;
}

Image shear(const Image& img, double factor) {
  if (factor == 0.0) return img;
  Image out(img.width(), img.height());
  const int bottom = img.height() - 1;
  for (int y = 0; y < img.height(); ++y) {
    const double offset = factor * (bottom - y);
    for (int x = 0; x < img.width(); ++x) {
      sample_bilinear(img, x - offset, y, &out.at(x, y, 0));
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
    }
  }
  return out;
}

AugmentDraw draw_augment(const AugmentConfig& cfg, RandomStream& stream) {
  // Every draw is consumed whether or not the transform fires, so the
  // parameters of one transform never depend on another's coin flip.
  AugmentDraw d;
  const double p = cfg.per_transform_probability;
  d.shifted = stream.bernoulli(p) && cfg.shift_range > 0.0;
  const double dx = stream.uniform(-cfg.shift_range, cfg.shift_range);
  const double dy = stream.uniform(-cfg.shift_range, cfg.shift_range);
  d.rotated = stream.bernoulli(p) && cfg.rotation_range > 0.0;
  const double deg = stream.uniform(-cfg.rotation_range, cfg.rotation_range);
  d.sheared = stream.bernoulli(p) && cfg.shear_range > 0.0;
  const double sh = stream.uniform(-cfg.shear_range, cfg.shear_range);
  d.flipped = stream.bernoulli(p) && cfg.hflip_enabled;
  if (d.shifted) {
    d.dx = dx;
    d.dy = dy;
  }
  if (d.rotated) d.degrees = deg;
  if (d.sheared) d.shear = sh;
  return d;
}

Image apply_augment(const Image& img, const AugmentDraw& draw) {
  Image out = img;
  if (draw.shifted) out = shift(out, draw.dx, draw.dy);
  if (draw.rotated) out = rotate(out, draw.degrees);
  if (draw.sheared) out = shear(out, draw.shear);
  if (draw.flipped) out = hflip(out);
  return out;
}

Image random_augment(const Image& img, const AugmentConfig& cfg, RandomStream& stream) {
  return apply_augment(img, draw_augment(cfg, stream));
}

}  // namespace leaflite
