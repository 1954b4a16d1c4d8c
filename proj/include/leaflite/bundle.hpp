#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "leaflite/head.hpp"
#include "leaflite/image.hpp"
#include "leaflite/imageproc.hpp"
#include "leaflite/mobilenet.hpp"
#include "leaflite/weights.hpp"

namespace leaflite {

inline constexpr const char* kBundleBackboneFile = "backbone.lwts";
inline constexpr const char* kBundleHeadFile = "head.lwts";
inline constexpr const char* kBundleManifestFile = "manifest.txt";

// Text manifest of a model bundle (flat key=value lines).
struct BundleManifest {
  std::vector<std::string> class_names;
  int input_side = kDefaultInputSide;
  // Raw images are CLAHE-enhanced before inference, matching training data
  // that was enhanced offline.
  bool clahe = true;
  ClaheParams clahe_params;
  double dropout_rate = 0.5;

  std::string to_text() const;
  static BundleManifest parse(const std::string& text);
};

// backbone.lwts + head.lwts + manifest.txt in one directory.
struct Bundle {
  ModelGraph graph;
  WeightStore backbone;
  Head head;
  BundleManifest manifest;
};

void save_bundle(const std::filesystem::path& dir, const WeightStore& backbone, const Head& head,
                 const BundleManifest& manifest);
// Only the head and manifest; the backbone file is copied from `backbone_file`.
void save_bundle(const std::filesystem::path& dir, const std::filesystem::path& backbone_file,
                 const Head& head, const BundleManifest& manifest);
Bundle load_bundle(const std::filesystem::path& dir);

// Key=value config text, shared with the CLI. Blank lines and lines starting
// with '#' are ignored.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& source);

struct Prediction {
  int class_id = 0;
  std::string class_name;
  std::vector<float> probabilities;
};

// Preprocessing as recorded in the manifest, then backbone and head.
Tensor prepare_input(const Bundle& bundle, const Image& img);
Prediction predict(const Bundle& bundle, const Image& img);
Prediction predict(const Bundle& bundle, const std::filesystem::path& image_path);

}  // namespace leaflite
