// One PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "leaflite/analysis.hpp"
#include "leaflite/bundle.hpp"
#include "leaflite/head.hpp"
#include "leaflite/mobilenet.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace leaflite;

namespace {

// Pinned limits.
constexpr double kKernelSeconds = 60;
constexpr double kGradientSeconds = 60;
constexpr double kClaheSeconds = 60;
constexpr double kTrainingSeconds = 300;
constexpr double kMetricGap = 5e-4;
constexpr double kCostRel = 0.10;
constexpr double kTargetMflops = 4.87;
constexpr double kTargetMb = 9.60;
constexpr double kBackboneRel = 0.02;
constexpr double kTargetBackbone = 2.28e6;
constexpr double kSeparableAccuracy = 95.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome kernels() {
  const auto r = oracles::run_kernel_suite(2024, 100);
  std::string d = std::to_string(r.cases_per_kernel) + " cases/kernel";
  for (const auto& [k, w] : r.worst) d += ", " + k + " " + fmt("%.1e", w);
  d += ", tol " + fmt("%.0e", oracles::kKernelTolerance);
  return {r.pass() && r.seconds < kKernelSeconds, d};
}

Outcome gradient() {
  const auto r = oracles::head_gradient_check(7);
  std::string d = std::to_string(r.checked) + " parameters, " + std::to_string(r.failures) +
                  " failures, worst excess " + fmt("%.3f", r.worst_excess) + " (" + r.worst_param +
                  "), " + std::to_string(r.one_sided) + " one-sided, rel tol " +
                  fmt("%.0e", oracles::kGradRelTolerance);
  return {r.pass() && r.seconds < kGradientSeconds, d};
}

Outcome metrics() {
  const auto r = oracles::check_reference_metrics();
  return {r.counts_match && r.worst_gap <= kMetricGap,
          "worst |P/R/F1 - table| " + fmt("%.2e", r.worst_gap) + ", counts " +
              (r.counts_match ? "match" : "differ") + ", printed digits " +
              (r.rounding_match ? "match" : "differ")};
}

Outcome costs(const fs::path& tmp) {
  const ModelGraph g = build_mobilenet_v2(256);
  const HeadConfig hc;
  CostReport r = cost_report(g, hc);
  const WeightStore backbone =
      init_synthetic_backbone(g, 1, default_calibration_batch(256, 2, 2));
  const Head head = Head::initialize(hc, 1);
  BundleManifest m;
  for (int k = 0; k < hc.classes; ++k) m.class_names.push_back("class_" + std::to_string(k));
  save_bundle(tmp / "bundle", backbone, head, m);
  r.size_bytes = bundle_size_bytes(tmp / "bundle");

  const bool exact = r.param_flops == 2 * r.total_params &&
                     r.total_params == static_cast<std::int64_t>(backbone.parameter_count() +
                                                                 head.to_weights().parameter_count());
  const double mflops_gap = std::fabs(r.param_mflops() - kTargetMflops) / kTargetMflops;
  const double mb_gap = std::fabs(r.size_mb() - kTargetMb) / kTargetMb;
  const double bb_gap = std::fabs(static_cast<double>(r.backbone_params) - kTargetBackbone) / kTargetBackbone;
  return {exact && mflops_gap <= kCostRel && mb_gap <= kCostRel && bb_gap <= kBackboneRel,
          "params " + std::to_string(r.total_params) + ", flops " + std::to_string(r.param_flops) +
              (exact ? " (= 2 x params)" : " (!= 2 x params)") + ", " + fmt("%.3f", r.param_mflops()) +
              " MFLOPs (" + fmt("%+.1f", 100 * (r.param_mflops() / kTargetMflops - 1)) + "%), " +
              fmt("%.3f", r.size_mb()) + " MB (" + fmt("%+.1f", 100 * (r.size_mb() / kTargetMb - 1)) +
              "%), backbone " + std::to_string(r.backbone_params) + " (" +
              fmt("%+.2f", 100 * (static_cast<double>(r.backbone_params) / kTargetBackbone - 1)) + "%)"};
}

Outcome architecture() {
  const auto a = oracles::check_architecture();
  std::string adds;
  for (int b : a.add_blocks) adds += (adds.empty() ? "" : ",") + std::to_string(b);
  return {a.pass(), "map " + std::to_string(a.map_h) + "x" + std::to_string(a.map_w) + "x" +
                        std::to_string(a.map_c) + ", pooled " + std::to_string(a.pooled) + ", " +
                        std::to_string(a.blocks) + " blocks, adds at {" + adds + "}" +
                        (a.shapes_match_calculator ? "" : ", shape calculator mismatch")};
}

Outcome clahe_properties() {
  const auto c = oracles::run_clahe_checks();
  return {c.pass() && c.seconds < kClaheSeconds,
          "constant dev " + std::to_string(c.constant_max_dev) + ", clip bound " +
              (c.clip_bound ? "held" : "broken") + ", mass " + (c.mass_preserved ? "kept" : "lost") +
              ", mapping gap " + fmt("%.1e", c.mapping_gap) + ", grey round-trip dev " +
              std::to_string(c.roundtrip_max_dev)};
}

Outcome training() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto trace = oracles::constant_feature_trace(5);
  const auto sep = oracles::train_separable(17);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string lrs;
  for (double lr : trace.lrs) lrs += (lrs.empty() ? "" : " ") + fmt("%.0e", lr);
  return {trace.pass() && sep.best_val_accuracy >= kSeparableAccuracy && secs < kTrainingSeconds,
          "plateau lr trace [" + lrs + "] stop after " + std::to_string(trace.lrs.size()) +
              " epochs; separable val " + fmt("%.2f", sep.best_val_accuracy) + "% test " +
              fmt("%.2f", sep.test_accuracy) + "% in " + std::to_string(sep.epochs) + " epochs"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every stage through the CLI; returns "" or the failing stage.
std::string desk_run(const fs::path& root) {
  const std::string r = root.string();
  const std::vector<std::vector<std::string>> stages = {
      {"synth-corpus", "--out", r + "/raw", "--classes", "3", "--per-class", "20", "--side", "128", "--seed",
       "11", "--run-dir", r + "/runs/synth"},
      {"enhance", "--in", r + "/raw", "--out", r + "/data", "--run-dir", r + "/runs/enhance"},
      {"split", "--data", r + "/data", "--out", r + "/split.txt", "--seed", "11", "--run-dir", r + "/runs/split"},
      {"init-backbone", "--out", r + "/backbone.lwts", "--seed", "11", "--calibration", "4", "--run-dir",
       r + "/runs/init"},
      {"train", "--data", r + "/data", "--manifest", r + "/split.txt", "--backbone", r + "/backbone.lwts",
       "--augment", "0", "--lr", "1e-3", "--max-epochs", "30", "--seed", "11", "--bundle-out", r + "/bundle",
       "--run-dir", r + "/runs/train"},
      {"eval", "--bundle", r + "/bundle", "--data", r + "/data", "--manifest", r + "/split.txt", "--augment",
       "0", "--runs", "5", "--seed", "11", "--run-dir", r + "/runs/eval"},
      {"analyze", "--bundle", r + "/bundle", "--run-dir", r + "/runs/analyze"},
      {"gradcam", "--bundle", r + "/bundle", "--image", r + "/data/class_1/leaf_000.png", "--run-dir",
       r + "/runs/gradcam"},
  };
  for (const auto& s : stages) {
    std::vector<std::string> args{"leaflite"};
    args.insert(args.end(), s.begin(), s.end());
    const int rc = cli::run(args);
    if (rc != 0) return s[0] + " exited " + std::to_string(rc);
  }
  return "";
}

double report_std(const std::string& report) {
  const std::string key = "accuracy std: ";
  const auto p = report.find(key);
  if (p == std::string::npos) return -1;
  return std::stod(report.substr(p + key.size()));
}

Outcome desk(const fs::path& tmp) {
  for (const char* run : {"a", "b"}) {
    const std::string err = desk_run(tmp / run);
    if (!err.empty()) return {false, std::string("run ") + run + ": " + err};
  }
  // Artifacts compared byte for byte; run.log and config.txt carry paths.
  std::size_t compared = 0;
  std::vector<std::string> differ;
  for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "run.log" || name == "config.txt") continue;
    const fs::path rel = fs::relative(e.path(), tmp / "a");
    if (slurp(e.path()) != slurp(tmp / "b" / rel)) differ.push_back(rel.generic_string());
    ++compared;
  }
  const std::string report = slurp(tmp / "a/runs/eval/report.txt");
  const double sd = report_std(report);
  std::string runs = slurp(tmp / "a/runs/eval/runs.csv");
  std::vector<double> acc;
  std::istringstream in(runs);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) acc.push_back(std::stod(line.substr(line.find(',') + 1)));
  bool equal = acc.size() == 5;
  for (double a : acc) equal = equal && a == acc.front();

  std::string d = std::to_string(compared) + " artifacts compared, " + std::to_string(differ.size()) +
                  " differ";
  if (!differ.empty()) d += " (first " + differ.front() + ")";
  d += ", eval runs " + std::to_string(acc.size()) + " std " + fmt("%.6f", sd) + "%";
  if (!acc.empty()) d += ", accuracy " + fmt("%.2f", acc.front()) + "%";
  return {differ.empty() && compared > 0 && equal && sd == 0.0, d};
}

}  // namespace

int main() {
  const fs::path tmp = fs::temp_directory_path() / ("leaflite_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"kernel oracle suite", kernels},
      {"head gradient check", gradient},
      {"metric fidelity", metrics},
      {"cost accounting", [&] { return costs(tmp); }},
      {"architecture shape", architecture},
      {"CLAHE properties", clahe_properties},
      {"training protocol", training},
      {"desk pipeline determinism", [&] { return desk(tmp / "desk"); }},
  };

  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", index - failed, criteria.size());
  fs::remove_all(tmp);
  return failed == 0 ? 0 : 1;
}
