#include <gtest/gtest.h>

#include <cmath>

#include "golden_common.hpp"
#include "leaflite/mobilenet.hpp"
#include "oracles.hpp"

namespace leaflite {
namespace {

struct Backbone {
  ModelGraph graph = build_mobilenet_v2(256);
  WeightStore weights = golden::backbone(graph);
};

Backbone& shared() {
  static Backbone b;
  return b;
}

TEST(Architecture, ShapesBlocksAndResiduals) {
  const auto a = oracles::check_architecture();
  EXPECT_EQ(a.blocks, 17);
  EXPECT_EQ(a.map_h, 8);
  EXPECT_EQ(a.map_w, 8);
  EXPECT_EQ(a.map_c, 1280);
  EXPECT_EQ(a.pooled, 1280);
  EXPECT_EQ(a.add_blocks, (std::vector<int>{2, 4, 5, 7, 8, 9, 11, 12, 14, 15}));
  EXPECT_EQ(a.add_blocks, a.expected_add_blocks);
  EXPECT_TRUE(a.shapes_match_calculator);
}

TEST(Architecture, FiveStrideTwoStages) {
  const ModelGraph g = build_mobilenet_v2(256);
  std::vector<int> sides;
  for (const auto& l : g.layers) {
    if (l.stride == 2) sides.push_back(l.out_h);
  }
  EXPECT_EQ(sides, (std::vector<int>{128, 64, 32, 16, 8}));
  EXPECT_EQ(g.feature_map_side(), 8);
  EXPECT_THROW(build_mobilenet_v2(16), ShapeError);
}

TEST(Architecture, ParameterNamesFollowKerasLayout) {
  const ModelGraph g = build_mobilenet_v2(256);
  const auto names = g.parameter_names();
  auto has = [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
  };
  EXPECT_TRUE(has("Conv1/kernel"));
  EXPECT_TRUE(has("bn_Conv1/moving_variance"));
  EXPECT_TRUE(has("expanded_conv_depthwise/depthwise_kernel"));
  EXPECT_FALSE(has("expanded_conv_expand/kernel"));
  EXPECT_TRUE(has("block_16_project_BN/gamma"));
  EXPECT_TRUE(has("Conv_1_bn/beta"));
  EXPECT_EQ(names.size(), 260u);
}

TEST(GoldenParity, FeaturesMatchKerasReference) {
  auto& b = shared();
  const WeightStore golden = load_weights(LEAFLITE_FIXTURE_DIR "/golden_features.lwts");
  const WeightStore regenerated = golden::inputs();
  double worst = 0, sum = 0;
  std::size_t n = 0;
  for (int i = 0; i < golden::kFixtureCount; ++i) {
    const std::string in = "input_" + std::to_string(i);
    const Tensor& input = golden.get(in);
    // The fixture's inputs are the ones this build synthesizes.
    const Tensor& mine = regenerated.get(in);
    ASSERT_EQ(input.shape(), mine.shape());
    double in_gap = 0;
    for (std::size_t k = 0; k < input.size(); ++k) {
      in_gap = std::max(in_gap, static_cast<double>(std::fabs(input[k] - mine[k])));
    }
    EXPECT_LE(in_gap, 1e-6) << in;

    const Tensor got = forward_features(b.graph, b.weights, input);
    const Tensor& want = golden.get("feature_" + std::to_string(i));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      const double d = std::fabs(static_cast<double>(got[k]) - want[k]);
      worst = std::max(worst, d);
      sum += d;
      ++n;
    }
  }
  EXPECT_LT(worst, 1e-3);
  EXPECT_LT(sum / static_cast<double>(n), 1e-4);
}

TEST(Forward, ZeroInputIsFinite) {
  auto& b = shared();
  const Tensor f = forward_features(b.graph, b.weights, Tensor(Shape{1, 256, 256, 3}));
  ASSERT_EQ(f.shape(), (Shape{1, 1280}));
  EXPECT_TRUE(all_finite(f));
}

TEST(Forward, IdenticalImagesGiveIdenticalRows) {
  auto& b = shared();
  const Tensor one = golden::inputs().get("input_2");
  Tensor two(Shape{2, 256, 256, 3});
  std::copy(one.data().begin(), one.data().end(), two.data().begin());
  std::copy(one.data().begin(), one.data().end(), two.data().begin() + static_cast<std::ptrdiff_t>(one.size()));
  const Tensor f = forward_features(b.graph, b.weights, two);
  for (int k = 0; k < 1280; ++k) EXPECT_EQ(f.at(0, k), f.at(1, k));
  const Tensor single = forward_features(b.graph, b.weights, one);
  for (int k = 0; k < 1280; ++k) EXPECT_EQ(f.at(0, k), single.at(0, k));
}

TEST(Forward, WrongInputDimsIsShapeError) {
  auto& b = shared();
  EXPECT_THROW(forward_features(b.graph, b.weights, Tensor(Shape{1, 128, 128, 3})), ShapeError);
  EXPECT_THROW(forward_features(b.graph, b.weights, Tensor(Shape{1, 256, 256, 1})), ShapeError);
}

TEST(Forward, PoolMatchesMeanOfMap) {
  auto& b = shared();
  const Tensor x = golden::inputs().get("input_1");
  const Tensor map = forward_feature_map(b.graph, b.weights, x);
  const Tensor pooled = forward_features(b.graph, b.weights, x);
  const auto want = oracles::ref_global_avg_pool(map);
  EXPECT_LE(oracles::max_rel_error(pooled.data(), want), 1e-5);
}

TEST(BackboneWeights, ValidationNamesProblems) {
  auto& b = shared();
  EXPECT_NO_THROW(validate_backbone_weights(b.graph, b.weights));

  WeightStore missing;
  for (const auto& [name, t] : b.weights.tensors()) {
    if (name != "Conv_1/kernel") missing.set(name, t);
  }
  try {
    validate_backbone_weights(b.graph, missing);
    FAIL();
  } catch (const WeightFormatError& e) {
    EXPECT_EQ(e.code(), WeightErrorCode::kMissingNames);
    EXPECT_NE(std::string(e.what()).find("Conv_1/kernel"), std::string::npos);
  }

  WeightStore wrong = b.weights;
  wrong.set("Conv1/kernel", Tensor(Shape{3, 3, 3, 16}));
  try {
    validate_backbone_weights(b.graph, wrong);
    FAIL();
  } catch (const WeightFormatError& e) {
    EXPECT_EQ(e.code(), WeightErrorCode::kShapeMismatch);
  }

  WeightStore extra = b.weights;
  extra.set("stray/kernel", Tensor(Shape{1}));
  try {
    validate_backbone_weights(b.graph, extra);
    FAIL();
  } catch (const WeightFormatError& e) {
    EXPECT_EQ(e.code(), WeightErrorCode::kUnexpectedNames);
  }
}

TEST(BackboneWeights, SyntheticInitIsDeterministic) {
  const ModelGraph g = build_mobilenet_v2(64);
  const Tensor calib = default_calibration_batch(64, 2, 5);
  const WeightStore a = init_synthetic_backbone(g, 5, calib);
  const WeightStore b = init_synthetic_backbone(g, 5, calib);
  EXPECT_EQ(serialize_weights(a), serialize_weights(b));
  EXPECT_EQ(a.parameter_count(), 2257984u);
}

}  // namespace
}  // namespace leaflite
