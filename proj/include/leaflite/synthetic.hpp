#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "leaflite/image.hpp"

namespace leaflite {

// Toy leaf images for smoke runs and tests: a green ellipse on a plain grey
// background. Class 0 is clean; class k > 0 carries lesions whose colour,
// size and count depend on k.
struct SyntheticLeafOptions {
  int side = 128;
  int classes = 3;
  // Global brightness is drawn from [low_light, 1].
  double low_light = 0.55;
  double noise = 6.0;  // per-pixel Gaussian noise, 8-bit levels
};

Image synthesize_leaf(int class_id, std::uint64_t seed, const SyntheticLeafOptions& options = {});

struct SyntheticCorpusConfig {
  SyntheticLeafOptions leaf;
  int per_class = 20;
  std::uint64_t seed = 0;
};

std::string synthetic_class_name(int class_id);

// Writes <dir>/<class name>/leaf_NNN.png and returns the written paths in
// class, then index order.
std::vector<std::filesystem::path> write_synthetic_corpus(const std::filesystem::path& dir,
                                                          const SyntheticCorpusConfig& config);

// Foreground mask: pixels that differ from the median border colour by more
// than a quarter of its brightest channel. Row-major, width x height.
std::vector<bool> leaf_mask(const Image& img);

}  // namespace leaflite
