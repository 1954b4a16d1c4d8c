#pragma once

#include <array>

#include "leaflite/image.hpp"
#include "leaflite/random.hpp"

namespace leaflite {

// Geometric runtime augmentation. All transforms keep the input extent and
// fill uncovered pixels from the nearest edge pixel.
struct AugmentConfig {
  double shift_range = 0.2;     // max |shift| as a fraction of the side
  double rotation_range = 20.0; // max |angle| in degrees
  double shear_range = 0.2;     // max |shear factor|
  bool hflip_enabled = true;
  double per_transform_probability = 0.5;

  static AugmentConfig disabled() {
    AugmentConfig c;
    c.per_transform_probability = 0.0;
    return c;
  }

  bool active() const {
    return per_transform_probability > 0.0 &&
           (shift_range > 0.0 || rotation_range > 0.0 || shear_range > 0.0 || hflip_enabled);
  }

  void validate() const;
};

// Content moves by round(dx_frac * width) columns and round(dy_frac * height)
// rows; positive values move right/down.
Image shift(const Image& img, double dx_frac, double dy_frac);

// Counter-clockwise (as displayed) rotation about the image center.
Image rotate(const Image& img, double degrees);

// Horizontal shear anchored at the bottom row: a pixel moves right by
// factor * (distance from the bottom row).
Image shear(const Image& img, double factor);

Image hflip(const Image& img);

// What random_augment drew; recorded for previews and frequency tests.
struct AugmentDraw {
  bool shifted = false, rotated = false, sheared = false, flipped = false;
  double dx = 0, dy = 0, degrees = 0, shear = 0;
};

AugmentDraw draw_augment(const AugmentConfig& cfg, RandomStream& stream);

Image apply_augment(const Image& img, const AugmentDraw& draw);

// Fixed order: shift -> rotate -> shear -> hflip.
Image random_augment(const Image& img, const AugmentConfig& cfg, RandomStream& stream);

}  // namespace leaflite
