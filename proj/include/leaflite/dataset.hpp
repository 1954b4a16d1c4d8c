#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "leaflite/error.hpp"

namespace leaflite {

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split split);
Split parse_split(std::string_view text);

struct DatasetEntry {
  std::string path;  // relative to the root, '/' separated
  int class_id = 0;
};

// Directory-per-class corpus. Entries are sorted by path.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<DatasetEntry> entries;
  std::vector<std::string> warnings;  // files skipped during the scan

  std::size_t size() const noexcept { return entries.size(); }
  std::filesystem::path absolute(const DatasetEntry& e) const { return root / e.path; }
  std::filesystem::path absolute(std::size_t i) const { return absolute(entries.at(i)); }
};

struct ScanOptions {
  // Decode every file; undecodable ones are skipped with a warning.
  bool verify_decode = true;
};

// One subdirectory per class (sorted by name); images directly inside.
DatasetIndex scan_dataset(const std::filesystem::path& root, const ScanOptions& options = {});

// (class name, count) in class-id order.
std::vector<std::pair<std::string, std::size_t>> class_distribution(const DatasetIndex& index);

// A known corpus layout: directory names in class-id order plus readable
// labels and reference counts.
struct ClassPreset {
  std::string name;
  std::vector<std::string> directories;
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;
};

// "plantvillage-tomato": the ten tomato classes, 0 = Bacterial spot ... 9 = Healthy.
std::optional<ClassPreset> find_preset(std::string_view name);

// Renumbers classes to the preset order. The class directories must be
// exactly the preset's.
DatasetIndex apply_preset(const DatasetIndex& index, const ClassPreset& preset);

inline constexpr double kTestFraction = 0.2;
inline constexpr double kValFraction = 0.2;
inline constexpr std::size_t kMinClassSize = 5;

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

// test = val = round(0.2 N), train = the rest.
SplitCounts split_counts(std::size_t n);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<Split> split_of;  // parallel to DatasetIndex::entries

  std::vector<std::size_t> members(Split split) const;
  std::size_t count(Split split) const;
};

// Per class: seeded shuffle of the path-sorted entries, then test, val and
// train are taken as contiguous slices in that order.
SplitAssignment split_dataset(const DatasetIndex& index, std::uint64_t seed);

// `<relative-path>\t<class_id>\t<TRAIN|VAL|TEST>` per line, in entry order.
std::string format_manifest(const DatasetIndex& index, const SplitAssignment& assignment);
void write_manifest(const std::filesystem::path& path, const DatasetIndex& index,
                    const SplitAssignment& assignment);

struct Manifest {
  DatasetIndex index;
  SplitAssignment assignment;
};

// Class names are recovered from the first path component of each entry.
Manifest parse_manifest(std::string_view text, const std::filesystem::path& root);
Manifest read_manifest(const std::filesystem::path& path, const std::filesystem::path& root);

// Entry indices of one split grouped into batches. TRAIN order is a
// permutation keyed by (seed, epoch); VAL and TEST keep entry order. The last
// batch may be short.
std::vector<std::vector<std::size_t>> make_batches(const SplitAssignment& assignment, Split split,
                                                   std::size_t batch_size, int epoch,
                                                   std::uint64_t seed);

}  // namespace leaflite
