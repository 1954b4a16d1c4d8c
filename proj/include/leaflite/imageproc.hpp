#pragma once

#include <vector>

#include "leaflite/image.hpp"
#include "leaflite/tensor.hpp"

namespace leaflite {

// sRGB (IEC 61966-2-1) -> linear -> XYZ (D65, 2 degree) -> Hunter Lab.
// a = b = 0 where Y = 0.
LabImage rgb_to_hunter_lab(const Image& img);

// Inverse conversion; out-of-gamut values are clamped to [0, 255].
Image hunter_lab_to_rgb(const LabImage& lab);

struct HunterLab {
  double L = 0, a = 0, b = 0;
};

HunterLab rgb_to_hunter_lab(double r8, double g8, double b8);

struct ClaheParams {
  int tiles_x = 7;
  int tiles_y = 7;
  double clip_beta = 3.0;
  int bins = 256;

  void validate() const;
};

// One contextual region's clipped histogram and the intensity mapping built
// from it. Exposed so tests can inspect the intermediate state.
struct ClaheTile {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;  // half-open pixel bounds
  std::vector<double> raw_histogram;
  std::vector<double> clipped_histogram;
  double clip_limit = 0;   // beta * pixels / bins
  double redistributed = 0;  // excess added back to every bin
  std::vector<double> bin_map;  // mapped L at each bin center
};

struct ClahePlan {
  int width = 0, height = 0;
  int tiles_x = 0, tiles_y = 0;
  int bins = 0;
  double l_min = 0, l_max = 0;  // intensity range histograms are taken over
  std::vector<ClaheTile> tiles;  // row-major, tiles_x per row

  const ClaheTile& tile(int tx, int ty) const {
    return tiles[static_cast<std::size_t>(ty) * static_cast<std::size_t>(tiles_x) +
                 static_cast<std::size_t>(tx)];
  }

  // Mapping of a single tile evaluated at continuous intensity l.
  double map_tile(const ClaheTile& t, double l) const;

  // Bilinear blend of the four nearest tile mappings at pixel (x, y).
  double map_pixel(int x, int y, double l) const;
};

// Integer partition of `extent` into `parts` spans differing by at most one.
int tile_start(int extent, int parts, int index);

ClahePlan clahe_plan(const std::vector<float>& lightness, int width, int height,
                     const ClaheParams& params);

// CLAHE on the Hunter L channel; a and b are carried through unchanged.
LabImage clahe_lab(const LabImage& lab, const ClaheParams& params);

Image clahe(const Image& img, const ClaheParams& params = {});

// Bilinear resize with half-pixel centers, producing float channel values.
std::vector<float> resize_bilinear(const Image& img, int out_w, int out_h);

// Resize to side x side and map [0, 255] -> [-1, 1]; shape (1, side, side, 3).
Tensor to_input_tensor(const Image& img, int side = 256);

// Nearest-level quantization of a resized raster, for previews.
Image resize_image(const Image& img, int out_w, int out_h);

}  // namespace leaflite
