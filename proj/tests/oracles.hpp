#pragma once

// Independent reference implementations shared by the unit suites and the
// acceptance binary. Nothing here calls the kernels it checks.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "leaflite/eval.hpp"
#include "leaflite/image.hpp"
#include "leaflite/imageproc.hpp"
#include "leaflite/mobilenet.hpp"
#include "leaflite/random.hpp"
#include "leaflite/tensor.hpp"

namespace leaflite::oracles {

// ---------------------------------------------------------------------------
// Kernels

// |got - want| / max(|want|, 1).
inline constexpr double kKernelTolerance = 1e-5;

// Nested-loop references in double precision. Same padding puts the extra
// pixel bottom/right.
std::vector<double> ref_conv2d(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
                               int stride, bool same, int& out_h, int& out_w);
std::vector<double> ref_depthwise(const Tensor& x, const Tensor& w, int stride, bool same,
                                  int& out_h, int& out_w);
std::vector<double> ref_batchnorm(const Tensor& x, const std::vector<float>& gamma,
                                  const std::vector<float>& beta, const std::vector<float>& mean,
                                  const std::vector<float>& var, double eps);
std::vector<double> ref_dense(const Tensor& x, const Tensor& w, const std::vector<float>& b);
std::vector<double> ref_softmax(const Tensor& x);
std::vector<double> ref_global_avg_pool(const Tensor& x);

double max_rel_error(std::span<const float> got, const std::vector<double>& want);

struct KernelSuiteResult {
  int cases_per_kernel = 0;
  std::map<std::string, double> worst;  // kernel -> worst relative error
  std::map<std::string, int> failures;  // kernel -> cases above tolerance
  double seconds = 0;
  bool pass() const;
};

// `cases` random small shapes per kernel.
KernelSuiteResult run_kernel_suite(std::uint64_t seed, int cases = 100);

// ---------------------------------------------------------------------------
// Head gradients

inline constexpr double kGradRelTolerance = 1e-2;
inline constexpr double kGradAbsFloor = 1e-7;

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t one_sided = 0;  // parameters next to a ReLU kink
  double worst_excess = 0;    // max of |a-n| / (rel * max(|a|,|n|) + floor)
  std::string worst_param;
  double base_loss_gap = 0;   // |scalar forward loss - engine loss|
  double seconds = 0;
  std::map<std::string, std::size_t> checked_by_tensor;
  bool pass() const { return checked > 0 && failures == 0 && base_loss_gap < 1e-9; }
};

// Random 16-sample batch through a double-precision head in train mode
// (batch statistics, dropout 0.5 with the mask held fixed). Every trainable
// element is compared against central finite differences of an independent
// scalar forward.
GradCheckResult head_gradient_check(std::uint64_t seed, int feature_dim = 1280, int classes = 10,
                                    int batch = 16);

// ---------------------------------------------------------------------------
// Per-class reference figures (test split of the tomato corpus)

struct ReferenceRow {
  const char* label;
  int count;
  double precision, recall, f1;
};

const std::array<ReferenceRow, 10>& reference_rows();

// A confusion matrix whose per-class rows round to the reference per-class
// figures. Rows are true classes.
ConfusionMatrix reference_confusion();

struct MetricFidelity {
  double worst_gap = 0;  // max |computed - reference| over P, R, F1
  bool counts_match = false;
  bool rounding_match = false;  // every value rounds to the printed digits
  bool pass() const { return counts_match && worst_gap <= 5e-4; }
};

MetricFidelity check_reference_metrics();

// ---------------------------------------------------------------------------
// CLAHE

struct ClaheCheck {
  int constant_max_dev = 0;       // over the constant test images
  bool clip_bound = false;        // clipped bins <= limit + redistribution
  bool mass_preserved = false;
  double mapping_gap = 0;         // plan vs scalar reference, max over bins
  int roundtrip_max_dev = 0;      // rgb -> lab -> rgb over all 256 grey levels
  double seconds = 0;
  bool pass() const {
    return constant_max_dev <= 1 && clip_bound && mass_preserved && mapping_gap < 1e-9 &&
           roundtrip_max_dev <= 1;
  }
};

// Two-region (dark / bright halves) image.
Image two_region_image(int width, int height, std::uint8_t dark, std::uint8_t bright);

// Recomputes every tile histogram, clip and mapping of `plan` from `lightness`
// and returns the largest mapping difference. Sets the bound/mass flags.
double reference_clahe_gap(const ClahePlan& plan, const std::vector<float>& lightness,
                           const ClaheParams& params, bool& clip_bound, bool& mass_preserved);

ClaheCheck run_clahe_checks();

// ---------------------------------------------------------------------------
// Architecture

struct ArchitectureCheck {
  int blocks = 0;
  int map_h = 0, map_w = 0, map_c = 0;
  int pooled = 0;
  std::vector<int> add_blocks;           // blocks carrying a residual add
  std::vector<int> expected_add_blocks;  // stride 1 and equal channels
  bool shapes_match_calculator = false;
  bool pass() const {
    return blocks == 17 && map_h == 8 && map_w == 8 && map_c == 1280 && pooled == 1280 &&
           add_blocks == expected_add_blocks && shapes_match_calculator;
  }
};

ArchitectureCheck check_architecture();

// ---------------------------------------------------------------------------
// Training scenarios

// Learning rate expected at each epoch when validation accuracy never moves
// after epoch 1, counted directly from the patience rules.
std::vector<double> plateau_lr_trace(double initial_lr, double factor, int lr_patience,
                                     int stop_patience);

struct ScheduleTrace {
  std::vector<double> lrs;       // lr used at each epoch
  std::vector<double> expected;  // plateau_lr_trace
  std::vector<int> checkpoints;  // epochs that saved a checkpoint
  double seconds = 0;
  bool pass() const;
};

// Identical feature rows with balanced labels: validation accuracy is
// constant, so only epoch 1 improves.
ScheduleTrace constant_feature_trace(std::uint64_t seed);

struct SeparableRun {
  double best_val_accuracy = 0;  // percent
  double test_accuracy = 0;
  int epochs = 0;
  double seconds = 0;
};

// Three well separated Gaussian clusters in 1280 dimensions, 100 per class.
SeparableRun train_separable(std::uint64_t seed);

}  // namespace leaflite::oracles
