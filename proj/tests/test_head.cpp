#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "leaflite/head.hpp"
#include "oracles.hpp"

namespace leaflite {
namespace {

Tensor random_features(int n, int f, std::uint64_t seed) {
  RandomStream rng(seed);
  Tensor x(Shape{n, f});
  for (float& v : x.data()) v = static_cast<float>(rng.normal(0.0, 1.0));
  return x;
}

TEST(HeadGradient, EveryParameterMatchesFiniteDifferences) {
  const auto r = oracles::head_gradient_check(7);
  EXPECT_LT(r.base_loss_gap, 1e-9);
  EXPECT_EQ(r.failures, 0u) << "worst " << r.worst_param << " excess " << r.worst_excess;
  // All trainable elements: 2*1280 + 1280*128 + 128 + 128*64 + 64 + 2*64 + 64*10 + 10.
  EXPECT_EQ(r.checked, 175562u);
  EXPECT_EQ(r.checked_by_tensor.size(), 10u);
  EXPECT_LT(r.seconds, 60.0);
}

TEST(HeadGradient, SmallHeadManySeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = oracles::head_gradient_check(seed, 12, 3, 16);
    EXPECT_TRUE(r.pass()) << "seed " << seed << " worst " << r.worst_param;
  }
}

TEST(HeadForward, InferRowsSumToOne) {
  HeadConfig cfg;
  const Head head = Head::initialize(cfg, 1);
  const Tensor p = head.predict(random_features(6, 1280, 2));
  ASSERT_EQ(p.shape(), (Shape{6, 10}));
  for (int i = 0; i < 6; ++i) {
    double s = 0;
    for (int k = 0; k < 10; ++k) s += p.at(i, k);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(HeadForward, TrainWithoutDropoutAndFrozenBnEqualsInfer) {
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  cfg.freeze_bn = true;
  Head head = Head::initialize(cfg, 3);
  RandomStream rng(4);
  for (auto* t : {&head.params().bn1_moving_mean, &head.params().bn2_moving_mean}) {
    for (float& v : t->data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  }
  for (auto* t : {&head.params().bn1_moving_variance, &head.params().bn2_moving_variance}) {
    for (float& v : t->data()) v = static_cast<float>(rng.uniform(0.5, 2.0));
  }
  const Tensor x = random_features(5, 1280, 5);
  const Tensor infer = head.predict(x);
  const Head before = head;
  const Tensor train = head.forward(x, HeadMode::kTrain);
  for (std::size_t i = 0; i < infer.size(); ++i) EXPECT_NEAR(train[i], infer[i], 1e-6);
  EXPECT_EQ(head.params().bn1_moving_mean, before.params().bn1_moving_mean);
}

TEST(HeadForward, MiniatureMatchesHandCalculation) {
  // Two features, two classes. Unit 0 of each dense layer carries feature 0,
  // unit 1 carries feature 1; the output layer reads the BN2 outputs 0 and 1.
  HeadConfig cfg;
  cfg.feature_dim = 2;
  cfg.classes = 2;
  HeadParams p = HeadParams::zeros(2, 2);
  for (auto* g : {&p.bn1_gamma, &p.bn1_moving_variance, &p.bn2_gamma, &p.bn2_moving_variance}) {
    for (float& v : g->data()) v = 1.0f;
  }
  p.dense1_kernel.at(0, 0) = 1.0f;
  p.dense1_kernel.at(1, 1) = 1.0f;
  p.dense2_kernel.at(0, 0) = 1.0f;
  p.dense2_kernel.at(1, 1) = 1.0f;
  p.out_kernel.at(0, 0) = 1.0f;
  p.out_kernel.at(1, 1) = 1.0f;
  p.out_bias[1] = 0.25f;
  const Head head(cfg, p);

  const Tensor x(Shape{1, 2}, std::vector<float>{2.0f, -1.0f});
  // BN divides by sqrt(1 + 1e-3) twice on the surviving path; the negative
  // feature dies at the first ReLU.
  const double logit0 = 2.0 / 1.001;
  const double logit1 = 0.25;
  const double p0 = 1.0 / (1.0 + std::exp(logit1 - logit0));
  const Tensor probs = head.predict(x);
  EXPECT_NEAR(probs[0], p0, 1e-6);
  EXPECT_NEAR(probs[1], 1.0 - p0, 1e-6);
}

TEST(HeadForward, TrainBatchOfOneIsRejected) {
  HeadConfig cfg;
  Head head = Head::initialize(cfg, 1);
  RandomStream s(1);
  EXPECT_THROW(head.forward(random_features(1, 1280, 1), HeadMode::kTrain, &s), ShapeError);
}

TEST(HeadForward, TrainUpdatesRunningStatsWithUnbiasedVariance) {
  HeadConfig cfg;
  cfg.feature_dim = 1;
  cfg.classes = 2;
  cfg.dropout_rate = 0.0;
  Head head = Head::initialize(cfg, 1);
  const Tensor x(Shape{4, 1}, std::vector<float>{1, 2, 3, 6});
  head.forward(x, HeadMode::kTrain);
  // mean 3, unbiased variance 14/3.
  EXPECT_NEAR(head.params().bn1_moving_mean[0], 0.01 * 3.0, 1e-6);
  EXPECT_NEAR(head.params().bn1_moving_variance[0], 0.99 + 0.01 * 14.0 / 3.0, 1e-6);
}

TEST(HeadForward, WrongFeatureWidthIsShapeError) {
  const Head head = Head::initialize(HeadConfig{}, 1);
  EXPECT_THROW(head.predict(random_features(2, 100, 1)), ShapeError);
}

TEST(HeadBackward, StationaryAtBalancedConstantBatch) {
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  cfg.freeze_bn = true;
  cfg.feature_dim = 4;
  cfg.classes = 2;
  BasicHead<double> head = BasicHead<double>::initialize(cfg, 2);
  for (double& v : head.params().out_kernel.data()) v = 0.0;
  BasicTensor<double> x(Shape{4, 4}, 0.75);
  BasicHead<double>::Cache cache;
  head.forward(x, HeadMode::kTrain, nullptr, &cache);
  const std::vector<int> labels{0, 1, 0, 1};
  const auto g = head.backward(cache, labels);
  for (const auto* t : g.trainable()) {
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(HeadBackward, DuplicatedBatchKeepsMeanGradient) {
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  cfg.feature_dim = 16;
  cfg.classes = 4;
  const BasicHead<double> head = BasicHead<double>::initialize(cfg, 9);
  RandomStream rng(10);
  BasicTensor<double> x(Shape{6, 16});
  for (double& v : x.data()) v = rng.normal(0, 1);
  std::vector<int> labels{0, 1, 2, 3, 1, 2};
  BasicTensor<double> xx(Shape{12, 16});
  std::copy(x.data().begin(), x.data().end(), xx.data().begin());
  std::copy(x.data().begin(), x.data().end(), xx.data().begin() + 96);
  std::vector<int> ll = labels;
  ll.insert(ll.end(), labels.begin(), labels.end());

  BasicHead<double> h1 = head, h2 = head;
  BasicHead<double>::Cache c1, c2;
  h1.forward(x, HeadMode::kTrain, nullptr, &c1);
  h2.forward(xx, HeadMode::kTrain, nullptr, &c2);
  const auto g1 = head.backward(c1, labels);
  const auto g2 = head.backward(c2, ll);
  const auto t1 = g1.trainable();
  const auto t2 = g2.trainable();
  for (std::size_t k = 0; k < t1.size(); ++k) {
    for (std::size_t i = 0; i < t1[k]->size(); ++i) EXPECT_NEAR((*t1[k])[i], (*t2[k])[i], 1e-6);
  }
}

TEST(HeadBackward, LabelCountMismatchIsShapeError) {
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  Head head = Head::initialize(cfg, 1);
  Head::Cache cache;
  head.forward(random_features(3, 1280, 1), HeadMode::kTrain, nullptr, &cache);
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(head.backward(cache, labels), ShapeError);
}

TEST(HeadWeights, RoundTripThroughStore) {
  HeadConfig cfg;
  const Head head = Head::initialize(cfg, 4);
  const WeightStore w = head.to_weights();
  EXPECT_EQ(w.size(), HeadParams::kTensorCount);
  EXPECT_EQ(w.parameter_count(), 178250u);
  const Head back = Head::from_weights(w, cfg);
  const auto a = head.params().all();
  const auto b = back.params().all();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(*a[k], *b[k]);
}

}  // namespace
}  // namespace leaflite
