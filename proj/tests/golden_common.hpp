#pragma once

#include <string>

#include "leaflite/imageproc.hpp"
#include "leaflite/mobilenet.hpp"
#include "leaflite/synthetic.hpp"
#include "leaflite/weights.hpp"

namespace leaflite::golden {

inline constexpr int kFixtureCount = 5;
inline constexpr std::uint64_t kBackboneSeed = 20240501;

inline WeightStore backbone(const ModelGraph& graph) {
  return init_synthetic_backbone(graph, kBackboneSeed,
                                 default_calibration_batch(graph.input_side, 8, kBackboneSeed + 1));
}

// input_i: 1 x 256 x 256 x 3 in [-1, 1].
inline WeightStore inputs() {
  WeightStore store;
  SyntheticLeafOptions opt;
  opt.side = 200;
  opt.classes = kFixtureCount;
  for (int i = 0; i < kFixtureCount; ++i) {
    const Image img = synthesize_leaf(i, 1000 + static_cast<std::uint64_t>(i), opt);
    store.set("input_" + std::to_string(i), to_input_tensor(img, 256));
  }
  return store;
}

}  // namespace leaflite::golden
