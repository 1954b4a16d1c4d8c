#include "leaflite/bundle.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace leaflite {
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw FormatError("bundle manifest: " + key + " is not an integer: \"" + v + "\"");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw FormatError("bundle manifest: " + key + " is not a number: \"" + v + "\"");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string number(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

std::string BundleManifest::to_text() const {
  std::string out = "format=leaflite-bundle-1\n";
  out += "classes=" + std::to_string(class_names.size()) + "\n";
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    out += "class." + std::to_string(i) + "=" + class_names[i] + "\n";
  }
  out += "input_side=" + std::to_string(input_side) + "\n";
  out += std::string("clahe=") + (clahe ? "1" : "0") + "\n";
  out += "clahe_tiles_x=" + std::to_string(clahe_params.tiles_x) + "\n";
  out += "clahe_tiles_y=" + std::to_string(clahe_params.tiles_y) + "\n";
  out += "clahe_clip_beta=" + number(clahe_params.clip_beta) + "\n";
  out += "clahe_bins=" + std::to_string(clahe_params.bins) + "\n";
  out += "dropout_rate=" + number(dropout_rate) + "\n";
  out += std::string("backbone=") + kBundleBackboneFile + "\n";
  out += std::string("head=") + kBundleHeadFile + "\n";
  return out;
}

BundleManifest BundleManifest::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  for (auto& [k, v] : parse_key_values(text, "bundle manifest")) kv[k] = v;
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("bundle manifest: missing key " + key);
    return it->second;
  };
  if (get("format") != "leaflite-bundle-1") {
    throw FormatError("bundle manifest: unsupported format " + get("format"));
  }
  BundleManifest m;
  const int classes = to_int("classes", get("classes"));
  if (classes < 2) throw FormatError("bundle manifest: need at least 2 classes");
  for (int i = 0; i < classes; ++i) m.class_names.push_back(get("class." + std::to_string(i)));
  m.input_side = to_int("input_side", get("input_side"));
  m.clahe = get("clahe") == "1";
  m.clahe_params.tiles_x = to_int("clahe_tiles_x", get("clahe_tiles_x"));
  m.clahe_params.tiles_y = to_int("clahe_tiles_y", get("clahe_tiles_y"));
  m.clahe_params.clip_beta = to_double("clahe_clip_beta", get("clahe_clip_beta"));
  m.clahe_params.bins = to_int("clahe_bins", get("clahe_bins"));
  m.dropout_rate = to_double("dropout_rate", get("dropout_rate"));
  return m;
}

void save_bundle(const fs::path& dir, const WeightStore& backbone, const Head& head,
                 const BundleManifest& manifest) {
  fs::create_directories(dir);
  save_weights(dir / kBundleBackboneFile, backbone);
  save_weights(dir / kBundleHeadFile, head.to_weights());
  write_text(dir / kBundleManifestFile, manifest.to_text());
}

void save_bundle(const fs::path& dir, const fs::path& backbone_file, const Head& head,
                 const BundleManifest& manifest) {
  fs::create_directories(dir);
  std::error_code ec;
  fs::copy_file(backbone_file, dir / kBundleBackboneFile, fs::copy_options::overwrite_existing,
                ec);
  if (ec) throw IoError("cannot copy " + backbone_file.string() + ": " + ec.message());
  save_weights(dir / kBundleHeadFile, head.to_weights());
  write_text(dir / kBundleManifestFile, manifest.to_text());
}

Bundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("bundle " + dir.string() + " is not a directory");
  Bundle b;
  b.manifest = BundleManifest::parse(read_text(dir / kBundleManifestFile));
  b.graph = build_mobilenet_v2(b.manifest.input_side);
  b.backbone = load_weights(dir / kBundleBackboneFile);
  validate_backbone_weights(b.graph, b.backbone);
  HeadConfig hc;
  hc.feature_dim = b.graph.feature_dim();
  hc.classes = static_cast<int>(b.manifest.class_names.size());
  hc.dropout_rate = b.manifest.dropout_rate;
  b.head = Head::from_weights(load_weights(dir / kBundleHeadFile), hc);
  return b;
}

Tensor prepare_input(const Bundle& bundle, const Image& img) {
  const Image enhanced = bundle.manifest.clahe ? clahe(img, bundle.manifest.clahe_params) : img;
  return to_input_tensor(enhanced, bundle.manifest.input_side);
}

Prediction predict(const Bundle& bundle, const Image& img) {
  const Tensor features = forward_features(bundle.graph, bundle.backbone, prepare_input(bundle, img));
  const Tensor probs = bundle.head.predict(features);
  Prediction p;
  p.probabilities = probs.values();
  for (std::size_t j = 1; j < p.probabilities.size(); ++j) {
    if (p.probabilities[j] > p.probabilities[static_cast<std::size_t>(p.class_id)]) {
      p.class_id = static_cast<int>(j);
    }
  }
  p.class_name = bundle.manifest.class_names.at(static_cast<std::size_t>(p.class_id));
  return p;
}

Prediction predict(const Bundle& bundle, const fs::path& image_path) {
  return predict(bundle, read_image(image_path));
}

}  // namespace leaflite
