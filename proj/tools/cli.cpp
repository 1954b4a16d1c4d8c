#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "leaflite/analysis.hpp"
#include "leaflite/augment.hpp"
#include "leaflite/bundle.hpp"
#include "leaflite/dataset.hpp"
#include "leaflite/eval.hpp"
#include "leaflite/features.hpp"
#include "leaflite/imageproc.hpp"
#include "leaflite/mobilenet.hpp"
#include "leaflite/synthetic.hpp"
#include "leaflite/train.hpp"
#include "leaflite/weights.hpp"

namespace leaflite::cli {
namespace fs = std::filesystem;

namespace {

struct OptionSpec {
  std::string key;
  std::string default_value;
  std::string help;
  bool required = false;
};

struct Resolved {
  std::string value;
  std::string source;  // flag, env, config, default
};

std::string env_name(const std::string& key) {
  std::string out = "LEAFLITE_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

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

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// Options shared by every command.
const std::vector<OptionSpec> kCommonOptions = {
    {"config", "", "key=value config file; keys may be prefixed with '<command>.'"},
    {"runs-dir", "runs", "parent directory for timestamped run directories"},
    {"run-dir", "", "exact run directory (overrides runs-dir)"},
};

class Settings {
 public:
  Settings(std::string command, std::map<std::string, Resolved> values)
      : command_(std::move(command)), values_(std::move(values)) {}

  const std::string& command() const { return command_; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("unknown setting " + key);
    return it->second.value;
  }

  bool has(const std::string& key) const { return !str(key).empty(); }

  long long integer(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + " expects an integer, got \"" + v + "\"");
  }

  int int32(const std::string& key) const { return static_cast<int>(integer(key)); }

  std::uint64_t seed(const std::string& key) const {
    const long long v = integer(key);
    if (v < 0) throw UsageError("--" + key + " must be non-negative");
    return static_cast<std::uint64_t>(v);
  }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used == v.size() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + key + " expects a number, got \"" + v + "\"");
  }

  bool flag(const std::string& key) const {
    std::string v = str(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw UsageError("--" + key + " expects a boolean, got \"" + str(key) + "\"");
  }

  fs::path path(const std::string& key) const { return fs::path(str(key)); }

  // Replayable key=value text with the source of each value.
  std::string to_text() const {
    std::string out = "# leaflite " + command_ + "\n";
    for (const auto& [k, r] : values_) out += "# " + k + " <- " + r.source + "\n";
    out += "command=" + command_ + "\n";
    for (const auto& [k, r] : values_) {
      if (k == "config" || k == "run-dir" || k == "runs-dir") continue;
      out += k + "=" + r.value + "\n";
    }
    return out;
  }

 private:
  std::string command_;
  std::map<std::string, Resolved> values_;
};

class RunContext {
 public:
  explicit RunContext(const Settings& s) {
    if (s.has("run-dir")) {
      dir_ = s.path("run-dir");
    } else {
      const std::time_t now = std::time(nullptr);
      std::tm tm{};
      localtime_r(&now, &tm);
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
      const fs::path base = s.path("runs-dir") / (std::string(stamp) + "-" + s.command());
      dir_ = base;
      for (int i = 2; fs::exists(dir_); ++i) dir_ = base.string() + "-" + std::to_string(i);
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
    write_text(dir_ / "config.txt", s.to_text());
    log_.open(dir_ / "run.log", std::ios::binary | std::ios::trunc);
    if (!log_) throw IoError("cannot write " + (dir_ / "run.log").string());
  }

  const fs::path& dir() const { return dir_; }

  void info(const std::string& msg) {
    std::cout << msg << "\n";
    log_ << msg << "\n";
    log_.flush();
  }

  // Log only.
  void note(const std::string& msg) {
    log_ << msg << "\n";
    log_.flush();
  }

 private:
  fs::path dir_;
  std::ofstream log_;
};

using Handler = std::function<void(const Settings&, RunContext&)>;

struct CommandDef {
  std::string name;
  std::string description;
  std::vector<OptionSpec> options;
  Handler handler;
};

// ---------------------------------------------------------------------------

ClaheParams clahe_params(const Settings& s) {
  ClaheParams p;
  p.tiles_x = s.int32("clahe-tiles-x");
  p.tiles_y = s.int32("clahe-tiles-y");
  p.clip_beta = s.real("clahe-clip");
  p.bins = s.int32("clahe-bins");
  p.validate();
  return p;
}

const std::vector<OptionSpec> kClaheOptions = {
    {"clahe-tiles-x", "7", "CLAHE tiles across"},
    {"clahe-tiles-y", "7", "CLAHE tiles down"},
    {"clahe-clip", "3", "CLAHE clip factor (multiple of the mean bin height)"},
    {"clahe-bins", "256", "CLAHE histogram bins"},
};

AugmentConfig augment_config(const Settings& s) {
  if (!s.flag("augment")) return AugmentConfig::disabled();
  AugmentConfig a;
  a.shift_range = s.real("shift");
  a.rotation_range = s.real("rotation");
  a.shear_range = s.real("shear");
  a.hflip_enabled = s.flag("hflip");
  a.per_transform_probability = s.real("augment-prob");
  a.validate();
  return a;
}

const std::vector<OptionSpec> kAugmentOptions = {
    {"augment", "1", "runtime augmentation on/off"},
    {"shift", "0.2", "max width/height shift as a fraction of the side"},
    {"rotation", "20", "max rotation in degrees"},
    {"shear", "0.2", "max shear factor"},
    {"hflip", "1", "allow horizontal flips"},
    {"augment-prob", "0.5", "probability of applying each transform"},
};

std::vector<OptionSpec> concat(std::initializer_list<std::vector<OptionSpec>> parts) {
  std::vector<OptionSpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// --- synth-corpus -----------------------------------------------------------

void cmd_synth(const Settings& s, RunContext& run) {
  SyntheticCorpusConfig c;
  c.leaf.classes = s.int32("classes");
  c.leaf.side = s.int32("side");
  c.leaf.low_light = s.real("low-light");
  c.per_class = s.int32("per-class");
  c.seed = s.seed("seed");
  if (c.leaf.classes < 2) throw UsageError("--classes must be >= 2");
  if (c.leaf.low_light <= 0.0 || c.leaf.low_light > 1.0) throw UsageError("--low-light must be in (0, 1]");
  const auto paths = write_synthetic_corpus(s.path("out"), c);
  run.info("wrote " + std::to_string(paths.size()) + " images to " + s.str("out"));
}

// --- enhance ----------------------------------------------------------------

void cmd_enhance(const Settings& s, RunContext& run) {
  const fs::path in = s.path("in"), out = s.path("out");
  const ClaheParams params = clahe_params(s);
  if (!fs::is_directory(in)) throw IoError("input directory " + in.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(in)) {
    if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no images under " + in.string());

  std::string failures;
  std::size_t ok = 0;
  std::optional<ErrorKind> first_failure;
  for (const auto& f : files) {
    fs::path rel = fs::relative(f, in);
    rel.replace_extension(".png");
    try {
      const Image enhanced = clahe(read_image(f), params);
      fs::create_directories((out / rel).parent_path());
      write_png(out / rel, enhanced);
      ++ok;
    } catch (const Error& e) {
      failures += rel.generic_string() + "\t" + e.what() + "\n";
      if (!first_failure) first_failure = e.kind();
    }
  }
  const std::size_t failed = files.size() - ok;
  write_text(run.dir() / "summary.txt", "images=" + std::to_string(files.size()) +
                                            "\nenhanced=" + std::to_string(ok) +
                                            "\nfailed=" + std::to_string(failed) + "\n");
  write_text(run.dir() / "failures.txt", failures);
  run.info("enhanced " + std::to_string(ok) + " of " + std::to_string(files.size()) +
           " images into " + out.string());
  if (first_failure) {
    run.info(std::to_string(failed) + " failures, see " + (run.dir() / "failures.txt").string());
    if (*first_failure == ErrorKind::kFormat) throw FormatError("some images failed to decode");
    throw IoError("some images failed");
  }
}

// --- split ------------------------------------------------------------------

void cmd_split(const Settings& s, RunContext& run) {
  DatasetIndex index = scan_dataset(s.path("data"));
  for (const auto& w : index.warnings) run.info("warning: " + w);
  if (s.has("preset")) {
    const auto preset = find_preset(s.str("preset"));
    if (!preset) throw UsageError("unknown preset " + s.str("preset"));
    index = apply_preset(index, *preset);
  }
  const SplitAssignment a = split_dataset(index, s.seed("seed"));
  const fs::path manifest = s.has("out") ? s.path("out") : run.dir() / "split.txt";
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  write_manifest(manifest, index, a);
  std::string dist = "class,total,train,val,test\n";
  for (std::size_t k = 0; k < index.class_names.size(); ++k) {
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index.entries[i].class_id == static_cast<int>(k)) ++counts[static_cast<int>(a.split_of[i])];
    }
    dist += index.class_names[k] + "," + std::to_string(counts[0] + counts[1] + counts[2]) + "," +
            std::to_string(counts[0]) + "," + std::to_string(counts[1]) + "," +
            std::to_string(counts[2]) + "\n";
  }
  write_text(run.dir() / "distribution.csv", dist);
  run.info("split " + std::to_string(index.size()) + " images: train " +
           std::to_string(a.count(Split::kTrain)) + ", val " + std::to_string(a.count(Split::kVal)) +
           ", test " + std::to_string(a.count(Split::kTest)));
  run.info("manifest: " + manifest.string());
}

// --- init-backbone ----------------------------------------------------------

void cmd_init_backbone(const Settings& s, RunContext& run) {
  const int side = s.int32("side");
  const ModelGraph graph = build_mobilenet_v2(side);
  const int count = s.int32("calibration");
  if (count < 2) throw UsageError("--calibration must be >= 2");
  const std::uint64_t seed = s.seed("seed");
  const Tensor cal = default_calibration_batch(side, count, derive_seed(seed, {hash_string("calibration")}));
  const WeightStore w = init_synthetic_backbone(graph, seed, cal);
  const fs::path out = s.path("out");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_weights(out, w);
  run.info("wrote synthetic backbone (" + std::to_string(w.parameter_count()) + " values) to " +
           out.string());
}

// --- train ------------------------------------------------------------------

PipelineOptions pipeline_options(const Settings& s, AugmentConfig augment) {
  PipelineOptions p;
  p.augment = augment;
  p.apply_clahe = s.flag("pipeline-clahe");
  p.clahe = clahe_params(s);
  p.seed = s.seed("seed");
  return p;
}

void cmd_train(const Settings& s, RunContext& run) {
  const Manifest m = read_manifest(s.path("manifest"), s.path("data"));
  const WeightStore backbone = load_weights(s.path("backbone"));
  const ModelGraph graph = build_mobilenet_v2(s.int32("side"));
  validate_backbone_weights(graph, backbone);

  TrainConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(s.integer("batch-size"));
  cfg.max_epochs = s.int32("max-epochs");
  cfg.initial_lr = s.real("lr");
  cfg.min_delta = s.real("min-delta");
  cfg.early_stop_patience = s.int32("patience");
  cfg.lr_patience = s.int32("lr-patience");
  cfg.lr_factor = s.real("lr-factor");
  cfg.dropout_rate = s.real("dropout");
  cfg.seed = s.seed("seed");
  cfg.validate();

  ImageFeatureProvider provider(m.index, m.assignment, graph, backbone,
                                pipeline_options(s, augment_config(s)));
  HeadConfig hc;
  hc.feature_dim = graph.feature_dim();
  hc.classes = static_cast<int>(m.index.class_names.size());
  hc.dropout_rate = cfg.dropout_rate;
  hc.freeze_bn = s.flag("freeze-bn");
  const Head init = Head::initialize(hc, derive_seed(cfg.seed, {hash_string("head")}));

  run.info("training on " + std::to_string(m.assignment.count(Split::kTrain)) + " images, validating on " +
           std::to_string(m.assignment.count(Split::kVal)));
  const TrainResult result = train_head(init, provider, cfg, [&](const EpochRecord& e) {
    char line[200];
    std::snprintf(line, sizeof line,
                  "epoch %3d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  lr %.3g%s%s", e.epoch,
                  e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.lr,
                  e.patient ? "  patient" : "", e.checkpoint ? "  checkpoint" : "");
    run.info(line);
  });
  write_text(run.dir() / "history.csv", result.history.to_csv());

  BundleManifest bm;
  bm.class_names = m.index.class_names;
  bm.input_side = graph.input_side;
  bm.clahe = s.flag("infer-clahe");
  bm.clahe_params = clahe_params(s);
  bm.dropout_rate = cfg.dropout_rate;
  const fs::path bundle_dir = s.has("bundle-out") ? s.path("bundle-out") : run.dir() / "bundle";
  save_bundle(bundle_dir, s.path("backbone"), result.best, bm);
  const EpochRecord& best = result.history.epochs.at(static_cast<std::size_t>(result.history.best_epoch - 1));
  run.info("best epoch " + std::to_string(result.history.best_epoch) + " (val_acc " +
           fmt("%.4f", best.val_accuracy) + "), " + std::to_string(result.history.epochs.size()) +
           " epochs run");
  run.info("bundle: " + bundle_dir.string());
}

// --- eval -------------------------------------------------------------------

void cmd_eval(const Settings& s, RunContext& run) {
  const Bundle bundle = load_bundle(s.path("bundle"));
  const Manifest m = read_manifest(s.path("manifest"), s.path("data"));
  if (m.index.class_names.size() != bundle.manifest.class_names.size()) {
    throw ShapeError("manifest has " + std::to_string(m.index.class_names.size()) +
                     " classes, bundle has " + std::to_string(bundle.manifest.class_names.size()));
  }
  const Split split = parse_split(s.str("split"));
  RepeatedEvalConfig cfg;
  cfg.runs = s.int32("runs");
  if (cfg.runs < 1) throw UsageError("--runs must be >= 1");
  const std::string roc = s.str("roc-source");
  if (roc == "raw") {
    cfg.roc_source = RocSource::kRaw;
  } else if (roc == "augmented") {
    cfg.roc_source = RocSource::kAugmented;
  } else {
    throw UsageError("--roc-source must be raw or augmented");
  }
  ImageFeatureProvider provider(m.index, m.assignment, bundle.graph, bundle.backbone,
                                pipeline_options(s, augment_config(s)));
  ImageFeatureProvider raw(m.index, m.assignment, bundle.graph, bundle.backbone,
                           pipeline_options(s, AugmentConfig::disabled()));
  const EvalReport report =
      repeated_eval(bundle.head, provider, &raw, split, bundle.manifest.class_names, cfg);
  write_text(run.dir() / "report.txt", report.to_text());
  write_text(run.dir() / "roc.csv", report.roc_csv());
  write_text(run.dir() / "runs.csv", report.runs_csv());
  std::string cm = "truth\\predicted";
  for (int k = 0; k < report.cm.classes(); ++k) cm += "," + std::to_string(k);
  cm += "\n";
  for (int t = 0; t < report.cm.classes(); ++t) {
    cm += std::to_string(t);
    for (int p = 0; p < report.cm.classes(); ++p) cm += "," + std::to_string(report.cm.at(t, p));
    cm += "\n";
  }
  write_text(run.dir() / "confusion.csv", cm);
  run.info(report.to_text());
}

// --- infer ------------------------------------------------------------------

void cmd_infer(const Settings& s, RunContext& run) {
  const Bundle bundle = load_bundle(s.path("bundle"));
  const Prediction p = predict(bundle, s.path("image"));
  std::string text = "class=" + p.class_name + "\nclass_id=" + std::to_string(p.class_id) + "\n";
  for (std::size_t k = 0; k < p.probabilities.size(); ++k) {
    text += "p." + bundle.manifest.class_names[k] + "=" + fmt("%.6f", p.probabilities[k]) + "\n";
  }
  write_text(run.dir() / "prediction.txt", text);
  run.info(p.class_name);
  for (std::size_t k = 0; k < p.probabilities.size(); ++k) {
    run.info("  " + bundle.manifest.class_names[k] + " " + fmt("%.6f", p.probabilities[k]));
  }
}

// --- analyze ----------------------------------------------------------------

void cmd_analyze(const Settings& s, RunContext& run) {
  CostReport r;
  if (s.has("bundle")) {
    const Bundle bundle = load_bundle(s.path("bundle"));
    r = cost_report(bundle.graph, bundle.head.config());
    r.size_bytes = bundle_size_bytes(s.path("bundle"));
  } else {
    HeadConfig hc;
    hc.classes = s.int32("classes");
    hc.validate();
    r = cost_report(build_mobilenet_v2(s.int32("side")), hc);
  }
  write_text(run.dir() / "cost.txt", r.to_text());
  write_text(run.dir() / "cost.csv", r.to_csv());
  std::string summary = "parameters " + std::to_string(r.total_params) + ", " +
                        fmt("%.2f", r.param_mflops()) + " MFLOPs (2 x params), " +
                        fmt("%.1f", static_cast<double>(r.total_macs) / 1e6) + " M MACs";
  if (r.size_bytes >= 0) summary += ", " + fmt("%.2f", r.size_mb()) + " MB";
  run.note(r.to_text());
  run.info(summary);
}

// --- gradcam ----------------------------------------------------------------

void cmd_gradcam(const Settings& s, RunContext& run) {
  const Bundle bundle = load_bundle(s.path("bundle"));
  const Image img = read_image(s.path("image"));
  int target = s.int32("class");
  if (target < 0) target = predict(bundle, img).class_id;
  const Heatmap h = gradcam(bundle, img, target);
  write_png(run.dir() / "heatmap.png", heatmap_image(h));
  const double alpha = s.real("alpha");
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("--alpha must be in [0, 1]");
  write_png(run.dir() / "overlay.png", heatmap_overlay(img, h, alpha));

  const Image resized = resize_image(img, h.side, h.side);
  const std::vector<bool> mask = leaf_mask(resized);
  double inside = 0, total = 0;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    total += h.values[i];
    if (mask[i]) inside += h.values[i];
  }
  const double mass = total > 0 ? inside / total : 0.0;
  std::string text = "class=" + bundle.manifest.class_names.at(static_cast<std::size_t>(target)) +
                     "\nclass_id=" + std::to_string(target) + "\nmask_mass=" + fmt("%.6f", mass) + "\n";
  write_text(run.dir() / "gradcam.txt", text);
  run.info("gradcam for " + bundle.manifest.class_names.at(static_cast<std::size_t>(target)) +
           ": heatmap mass inside foreground mask " + fmt("%.3f", mass));
}

// --- augment-preview --------------------------------------------------------

void cmd_augment_preview(const Settings& s, RunContext& run) {
  const Image img = read_image(s.path("image"));
  const AugmentConfig cfg = augment_config(s);
  const int count = s.int32("count");
  if (count < 1) throw UsageError("--count must be >= 1");
  RandomStream rng(s.seed("seed"));
  std::string draws = "index,shifted,dx,dy,rotated,degrees,sheared,shear,flipped\n";
  for (int i = 0; i < count; ++i) {
    const AugmentDraw d = draw_augment(cfg, rng);
    char name[32];
    std::snprintf(name, sizeof name, "preview_%02d.png", i);
    write_png(run.dir() / name, apply_augment(img, d));
    char line[200];
    std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%d,%.6f,%d,%.6f,%d\n", i, d.shifted, d.dx, d.dy,
                  d.rotated, d.degrees, d.sheared, d.shear, d.flipped);
    draws += line;
  }
  write_text(run.dir() / "draws.csv", draws);
  run.info("wrote " + std::to_string(count) + " previews to " + run.dir().string());
}

// ---------------------------------------------------------------------------

std::vector<CommandDef> commands() {
  const std::vector<OptionSpec> train_opts = {
      {"data", "", "dataset root the manifest paths are relative to", true},
      {"manifest", "", "split manifest from the split command", true},
      {"backbone", "", "backbone weight file (.lwts)", true},
      {"side", "256", "input side"},
      {"bundle-out", "", "output bundle directory (default <run>/bundle)"},
      {"batch-size", "16", "mini-batch size"},
      {"max-epochs", "1000", "epoch cap"},
      {"lr", "1e-5", "initial Adam learning rate"},
      {"min-delta", "1e-4", "smallest validation-accuracy gain that resets patience"},
      {"patience", "10", "patient epochs before early stop"},
      {"lr-patience", "4", "patient epochs before each learning-rate decay"},
      {"lr-factor", "0.1", "learning-rate decay factor"},
      {"dropout", "0.5", "dropout rate after the first dense block"},
      {"freeze-bn", "0", "use running statistics in head BN during training"},
      {"pipeline-clahe", "0", "apply CLAHE on the fly (0 when the data was enhanced offline)"},
      {"infer-clahe", "1", "record that raw inference inputs need CLAHE"},
      {"seed", "0", "seed for head init, shuffling, dropout and augmentation"},
  };
  const std::vector<OptionSpec> eval_opts = {
      {"bundle", "", "model bundle directory", true},
      {"data", "", "dataset root", true},
      {"manifest", "", "split manifest", true},
      {"split", "TEST", "split to score (TRAIN, VAL, TEST)"},
      {"runs", "100", "repeated evaluation runs"},
      {"roc-source", "raw", "ROC inputs: raw or augmented"},
      {"pipeline-clahe", "0", "apply CLAHE on the fly"},
      {"seed", "0", "augmentation seed"},
  };
  return {
      {"synth-corpus", "write a synthetic leaf corpus (one directory per class)",
       {{"out", "", "output directory", true},
        {"classes", "3", "class count"},
        {"per-class", "20", "images per class"},
        {"side", "128", "image side"},
        {"low-light", "0.55", "lowest brightness factor"},
        {"seed", "0", "seed"}},
       cmd_synth},
      {"enhance", "CLAHE-enhance every image under a directory into a mirrored PNG tree",
       concat({{{"in", "", "input directory", true}, {"out", "", "output directory", true}},
               kClaheOptions}),
       cmd_enhance},
      {"split", "stratified 60/20/20 split into a manifest",
       {{"data", "", "dataset root (one directory per class)", true},
        {"preset", "", "class layout preset, e.g. plantvillage-tomato"},
        {"out", "", "manifest path (default <run>/split.txt)"},
        {"seed", "0", "split seed"}},
       cmd_split},
      {"init-backbone", "write a seeded stand-in backbone with calibrated BN statistics",
       {{"out", "", "output weight file", true},
        {"side", "256", "input side"},
        {"calibration", "8", "calibration images"},
        {"seed", "0", "seed"}},
       cmd_init_backbone},
      {"train", "train the classifier head on frozen backbone features",
       concat({train_opts, kAugmentOptions, kClaheOptions}), cmd_train},
      {"eval", "repeated evaluation with metrics, ROC and run statistics",
       concat({eval_opts, kAugmentOptions, kClaheOptions}), cmd_eval},
      {"infer", "classify one image",
       {{"bundle", "", "model bundle directory", true}, {"image", "", "image file", true}},
       cmd_infer},
      {"analyze", "parameter, FLOP, MAC and size report",
       {{"bundle", "", "model bundle directory (omit for the default architecture)"},
        {"classes", "10", "head classes when no bundle is given"},
        {"side", "256", "input side when no bundle is given"}},
       cmd_analyze},
      {"gradcam", "class activation heatmap for one image",
       {{"bundle", "", "model bundle directory", true},
        {"image", "", "image file", true},
        {"class", "-1", "target class id (-1: predicted class)"},
        {"alpha", "0.45", "overlay opacity"}},
       cmd_gradcam},
      {"augment-preview", "write augmented variants of one image",
       concat({{{"image", "", "image file", true},
                {"count", "8", "variants"},
                {"seed", "0", "seed"}},
               kAugmentOptions}),
       cmd_augment_preview},
  };
}

std::map<std::string, std::string> read_config(const fs::path& path, const std::string& command) {
  std::map<std::string, std::string> plain, scoped;
  for (auto& [k, v] : parse_key_values(read_text(path), path.string())) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      plain[k] = v;
    } else if (k.substr(0, dot) == command) {
      scoped[k.substr(dot + 1)] = v;
    }
  }
  for (auto& [k, v] : scoped) plain[k] = v;
  return plain;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kFormat: return kExitFormat;
    case ErrorKind::kNumeric: return kExitNumeric;
    case ErrorKind::kShape: return kExitShape;
  }
  return kExitOther;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"leaflite: tomato leaf disease classification toolkit"};
  app.require_subcommand(1);
  app.footer(
      "Option values resolve as: flag > LEAFLITE_<OPTION> environment variable > --config file > "
      "default.\nExit codes: 0 ok, 2 usage, 3 I/O, 4 format, 5 numeric, 6 shape, 1 other.");

  const std::vector<CommandDef> defs = commands();
  struct Bound {
    const CommandDef* def;
    CLI::App* sub;
    std::vector<OptionSpec> options;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> handles;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& d : defs) {
    auto b = std::make_unique<Bound>();
    b->def = &d;
    b->sub = app.add_subcommand(d.name, d.description);
    b->options = concat({d.options, kCommonOptions});
    for (const auto& o : b->options) {
      std::string help = o.help;
      if (o.required) {
        help += " (required)";
      } else if (!o.default_value.empty()) {
        help += " (default: " + o.default_value + ")";
      }
      b->handles[o.key] = b->sub->add_option("--" + o.key, b->raw[o.key], help);
    }
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  for (auto& b : bound) {
    if (!b->sub->parsed()) continue;
    const std::string& name = b->def->name;
    try {
      // Config file location itself: flag, then environment.
      std::string config_path = b->raw["config"];
      if (b->handles["config"]->count() == 0) {
        if (const char* env = std::getenv(env_name("config").c_str())) config_path = env;
      }
      std::map<std::string, std::string> file;
      if (!config_path.empty()) file = read_config(config_path, name);

      std::map<std::string, Resolved> values;
      for (const auto& o : b->options) {
        Resolved r{o.default_value, "default"};
        if (b->handles[o.key]->count() > 0) {
          r = {b->raw[o.key], "flag"};
        } else if (const char* env = std::getenv(env_name(o.key).c_str())) {
          r = {env, "env " + env_name(o.key)};
        } else if (auto it = file.find(o.key); it != file.end()) {
          r = {it->second, "config " + config_path};
        }
        if (o.key == "config") r = {config_path, r.source};
        values[o.key] = r;
      }
      Settings settings(name, values);
      for (const auto& o : b->options) {
        if (o.required && !settings.has(o.key)) {
          throw UsageError("missing required option --" + o.key);
        }
      }
      RunContext ctx(settings);
      ctx.note("command: " + name);
      ctx.note("run directory: " + ctx.dir().string());
      b->def->handler(settings, ctx);
      return kExitOk;
    } catch (const Error& e) {
      std::cerr << "leaflite " << name << ": " << e.what() << "\n";
      return exit_code(e.kind());
    } catch (const std::exception& e) {
      std::cerr << "leaflite " << name << ": " << e.what() << "\n";
      return kExitOther;
    }
  }
  return kExitUsage;
}

}  // namespace leaflite::cli
