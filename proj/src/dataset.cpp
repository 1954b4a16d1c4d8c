#include "leaflite/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "leaflite/image.hpp"
#include "leaflite/random.hpp"

namespace leaflite {
namespace fs = std::filesystem;

namespace {

const ClassPreset kTomatoPreset{
    "plantvillage-tomato",
    {"Tomato___Bacterial_spot", "Tomato___Early_blight", "Tomato___Late_blight",
     "Tomato___Leaf_Mold", "Tomato___Septoria_leaf_spot",
     "Tomato___Spider_mites Two-spotted_spider_mite", "Tomato___Target_Spot",
     "Tomato___Tomato_Yellow_Leaf_Curl_Virus", "Tomato___Tomato_mosaic_virus",
     "Tomato___healthy"},
    {"Bacterial Spot", "Early Blight", "Late Blight", "Leaf Mold", "Septoria Leaf Spot",
     "Two-spotted Spider Mites", "Target Spot", "Yellow Leaf Curl Virus", "Tomato Mosaic Virus",
     "Healthy"},
    {2127, 1000, 1909, 952, 1771, 1676, 1404, 5357, 373, 1591},
};

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "TRAIN";
    case Split::kVal: return "VAL";
    case Split::kTest: return "TEST";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "TRAIN") return Split::kTrain;
  if (text == "VAL") return Split::kVal;
  if (text == "TEST") return Split::kTest;
  throw FormatError("unknown split \"" + std::string(text) + "\"");
}

DatasetIndex scan_dataset(const fs::path& root, const ScanOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw IoError("dataset root " + root.string() + " is not a directory");
  }
  DatasetIndex index;
  index.root = root;
  std::vector<std::string> dirs;
  for (const auto& de : fs::directory_iterator(root)) {
    if (de.is_directory()) dirs.push_back(de.path().filename().string());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    std::vector<std::string> files;
    for (const auto& de : fs::directory_iterator(root / dir)) {
      if (de.is_regular_file() && has_image_extension(de.path())) {
        files.push_back(de.path().filename().string());
      }
    }
    if (files.empty()) continue;
    std::sort(files.begin(), files.end());
    const int class_id = static_cast<int>(index.class_names.size());
    bool any = false;
    for (const auto& f : files) {
      const std::string rel = dir + "/" + f;
      if (options.verify_decode) {
        try {
          read_image(root / rel);
        } catch (const Error& e) {
          index.warnings.push_back(rel + ": " + e.what());
          continue;
        }
      }
      index.entries.push_back({rel, class_id});
      any = true;
    }
    if (any) index.class_names.push_back(dir);
  }
  if (index.class_names.empty()) {
    throw UsageError("no classes found under " + root.string());
  }
  std::sort(index.entries.begin(), index.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.path < b.path; });
  return index;
}

std::vector<std::pair<std::string, std::size_t>> class_distribution(const DatasetIndex& index) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& name : index.class_names) out.emplace_back(name, 0);
  for (const auto& e : index.entries) ++out.at(static_cast<std::size_t>(e.class_id)).second;
  return out;
}

std::optional<ClassPreset> find_preset(std::string_view name) {
  if (name == kTomatoPreset.name) return kTomatoPreset;
  return std::nullopt;
}

DatasetIndex apply_preset(const DatasetIndex& index, const ClassPreset& preset) {
  const std::set<std::string> have(index.class_names.begin(), index.class_names.end());
  const std::set<std::string> want(preset.directories.begin(), preset.directories.end());
  if (have != want) {
    std::string missing;
    for (const auto& d : want) {
      if (!have.count(d)) missing += (missing.empty() ? "" : ", ") + d;
    }
    std::string extra;
    for (const auto& d : have) {
      if (!want.count(d)) extra += (extra.empty() ? "" : ", ") + d;
    }
    throw UsageError("class directories do not match preset " + preset.name +
                     (missing.empty() ? "" : "; missing: " + missing) +
                     (extra.empty() ? "" : "; unexpected: " + extra));
  }
  std::map<std::string, int> id_of;
  for (std::size_t i = 0; i < preset.directories.size(); ++i) {
    id_of[preset.directories[i]] = static_cast<int>(i);
  }
  DatasetIndex out = index;
  out.class_names = preset.directories;
  for (auto& e : out.entries) {
    e.class_id = id_of.at(index.class_names.at(static_cast<std::size_t>(e.class_id)));
  }
  return out;
}

SplitCounts split_counts(std::size_t n) {
  SplitCounts c;
  // round(n / 5); n / 5 never lands on .5.
  c.test = (2 * n + 5) / 10;
  c.val = c.test;
  c.train = n - c.test - c.val;
  return c;
}

std::vector<std::size_t> SplitAssignment::members(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_of.size(); ++i) {
    if (split_of[i] == split) out.push_back(i);
  }
  return out;
}

std::size_t SplitAssignment::count(Split split) const {
  return static_cast<std::size_t>(std::count(split_of.begin(), split_of.end(), split));
}

SplitAssignment split_dataset(const DatasetIndex& index, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(index.class_names.size());
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    by_class.at(static_cast<std::size_t>(index.entries[i].class_id)).push_back(i);
  }
  SplitAssignment a;
  a.seed = seed;
  a.split_of.assign(index.entries.size(), Split::kTrain);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < kMinClassSize) {
      throw UsageError("class \"" + index.class_names[c] + "\" has " +
                       std::to_string(members.size()) + " samples; at least " +
                       std::to_string(kMinClassSize) + " are needed to split");
    }
    RandomStream rng(derive_seed(seed, {hash_string("split"), hash_string(index.class_names[c])}));
    shuffle(members, rng);
    const SplitCounts counts = split_counts(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      a.split_of[members[k]] = k < counts.test               ? Split::kTest
                               : k < counts.test + counts.val ? Split::kVal
                                                              : Split::kTrain;
    }
  }
  return a;
}

std::string format_manifest(const DatasetIndex& index, const SplitAssignment& assignment) {
  if (assignment.split_of.size() != index.entries.size()) {
    throw ShapeError("split assignment does not match the dataset index");
  }
  std::string out;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto& e = index.entries[i];
    out += e.path;
    out += '\t';
    out += std::to_string(e.class_id);
    out += '\t';
    out += to_string(assignment.split_of[i]);
    out += '\n';
  }
  return out;
}

void write_manifest(const fs::path& path, const DatasetIndex& index,
                    const SplitAssignment& assignment) {
  const std::string text = format_manifest(index, assignment);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

Manifest parse_manifest(std::string_view text, const fs::path& root) {
  Manifest m;
  m.index.root = root;
  std::map<int, std::string> names;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": expected three tab-separated fields");
    }
    const std::string path(line.substr(0, t1));
    const std::string id_text(line.substr(t1 + 1, t2 - t1 - 1));
    int class_id = 0;
    try {
      std::size_t used = 0;
      class_id = std::stoi(id_text, &used);
      if (used != id_text.size() || class_id < 0) throw std::invalid_argument(id_text);
    } catch (const std::exception&) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": bad class id \"" +
                        id_text + "\"");
    }
    const auto slash = path.find('/');
    if (slash == std::string::npos || slash == 0) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": path has no class directory");
    }
    const std::string dir = path.substr(0, slash);
    auto [it, inserted] = names.emplace(class_id, dir);
    if (!inserted && it->second != dir) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": class id " +
                        std::to_string(class_id) + " used for both " + it->second + " and " + dir);
    }
    m.index.entries.push_back({path, class_id});
    m.assignment.split_of.push_back(parse_split(line.substr(t2 + 1)));
  }
  if (m.index.entries.empty()) throw FormatError("manifest is empty");
  const int classes = names.rbegin()->first + 1;
  for (int c = 0; c < classes; ++c) {
    auto it = names.find(c);
    if (it == names.end()) {
      throw FormatError("manifest has no entries for class id " + std::to_string(c));
    }
    m.index.class_names.push_back(it->second);
  }
  return m;
}

Manifest read_manifest(const fs::path& path, const fs::path& root) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), root);
}

std::vector<std::vector<std::size_t>> make_batches(const SplitAssignment& assignment, Split split,
                                                   std::size_t batch_size, int epoch,
                                                   std::uint64_t seed) {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  std::vector<std::size_t> order = assignment.members(split);
  if (order.empty()) throw UsageError(std::string("split ") + to_string(split) + " is empty");
  if (split == Split::kTrain) {
    RandomStream rng(derive_seed(seed, {hash_string("epoch"), static_cast<std::uint64_t>(epoch)}));
    shuffle(order, rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace leaflite
