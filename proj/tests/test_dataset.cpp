#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "leaflite/dataset.hpp"
#include "leaflite/synthetic.hpp"
#include "test_support.hpp"

namespace leaflite {
namespace {

using testing::TempDir;

void write_corpus(const std::filesystem::path& root, const std::vector<std::pair<std::string, int>>& classes) {
  SyntheticLeafOptions opt;
  opt.side = 24;
  opt.classes = 1;
  std::uint64_t seed = 0;
  for (const auto& [name, n] : classes) {
    std::filesystem::create_directories(root / name);
    for (int i = 0; i < n; ++i) {
      write_png(root / name / ("img_" + std::to_string(i) + ".png"), synthesize_leaf(0, seed++, opt));
    }
  }
}

SplitAssignment all_in(Split s, std::size_t n) {
  SplitAssignment a;
  a.split_of.assign(n, s);
  return a;
}

TEST(Scan, OneClassOfThree) {
  TempDir dir("scan");
  write_corpus(dir.path(), {{"only", 3}});
  const DatasetIndex idx = scan_dataset(dir.path());
  EXPECT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx.class_names, (std::vector<std::string>{"only"}));
  const auto dist = class_distribution(idx);
  ASSERT_EQ(dist.size(), 1u);
  EXPECT_EQ(dist[0].second, 3u);
}

TEST(Scan, EmptyAndMissingRoots) {
  TempDir dir("empty");
  try {
    scan_dataset(dir.path());
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("no classes found"), std::string::npos);
  }
  EXPECT_THROW(scan_dataset(dir / "nope"), IoError);
}

TEST(Scan, UndecodableFilesAreWarnedAndSkipped) {
  TempDir dir("bad");
  write_corpus(dir.path(), {{"a", 2}, {"b", 2}});
  testing::write_file(dir / "a/broken.png", "not an image");
  const DatasetIndex idx = scan_dataset(dir.path());
  EXPECT_EQ(idx.size(), 4u);
  ASSERT_EQ(idx.warnings.size(), 1u);
  EXPECT_NE(idx.warnings[0].find("broken.png"), std::string::npos);
}

TEST(Scan, SortedPathsAndClassIds) {
  TempDir dir("sorted");
  write_corpus(dir.path(), {{"zeta", 2}, {"alpha", 3}});
  const DatasetIndex idx = scan_dataset(dir.path());
  EXPECT_EQ(idx.class_names, (std::vector<std::string>{"alpha", "zeta"}));
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx.entries[i - 1].path, idx.entries[i].path);
  EXPECT_EQ(idx.entries.front().class_id, 0);
  EXPECT_EQ(idx.entries.back().class_id, 1);
}

TEST(SplitCounts, ExactAndRoundedCases) {
  const auto a = split_counts(1000);
  EXPECT_EQ(a.train, 600u);
  EXPECT_EQ(a.val, 200u);
  EXPECT_EQ(a.test, 200u);
  EXPECT_EQ(split_counts(2127).test, 425u);
  const auto mosaic = split_counts(373);
  EXPECT_EQ(mosaic.test, 75u);
  EXPECT_LE(std::abs(static_cast<int>(mosaic.test) - 74), 1);
}

TEST(SplitCounts, PublishedTestCountsWithinOne) {
  const auto preset = find_preset("plantvillage-tomato");
  ASSERT_TRUE(preset.has_value());
  const std::vector<int> published{425, 200, 381, 190, 354, 335, 281, 1071, 74, 318};
  std::size_t total = 0;
  for (std::size_t k = 0; k < 10; ++k) {
    total += preset->counts[k];
    EXPECT_LE(std::abs(static_cast<int>(split_counts(preset->counts[k]).test) - published[k]), 1)
        << preset->labels[k];
  }
  EXPECT_EQ(total, 18160u);
  EXPECT_EQ(preset->counts[0], 2127u);
  EXPECT_EQ(preset->counts[8], 373u);
}

TEST(Split, StratifiedDeterministicAndSeedSensitive) {
  TempDir dir("split");
  write_corpus(dir.path(), {{"a", 10}, {"b", 7}});
  const DatasetIndex idx = scan_dataset(dir.path());
  const SplitAssignment s1 = split_dataset(idx, 42), s2 = split_dataset(idx, 42);
  EXPECT_EQ(format_manifest(idx, s1), format_manifest(idx, s2));
  EXPECT_NE(format_manifest(idx, s1), format_manifest(idx, split_dataset(idx, 43)));
  // a: 10 -> 6/2/2, b: 7 -> 5/1/1.
  std::size_t test_a = 0, test_b = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (s1.split_of[i] != Split::kTest) continue;
    (idx.entries[i].class_id == 0 ? test_a : test_b) += 1;
  }
  EXPECT_EQ(test_a, split_counts(10).test);
  EXPECT_EQ(test_b, split_counts(7).test);
  EXPECT_EQ(s1.count(Split::kTrain) + s1.count(Split::kVal) + s1.count(Split::kTest), idx.size());
}

TEST(Split, TinyClassIsNamed) {
  TempDir dir("tiny");
  write_corpus(dir.path(), {{"big", 6}, {"small_one", 4}});
  const DatasetIndex idx = scan_dataset(dir.path());
  try {
    split_dataset(idx, 1);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("small_one"), std::string::npos);
  }
}

TEST(Manifest, RoundTrip) {
  TempDir dir("manifest");
  write_corpus(dir.path(), {{"a", 5}, {"b", 5}});
  const DatasetIndex idx = scan_dataset(dir.path());
  const SplitAssignment s = split_dataset(idx, 3);
  write_manifest(dir / "m.txt", idx, s);
  const Manifest m = read_manifest(dir / "m.txt", dir.path());
  EXPECT_EQ(m.index.class_names, idx.class_names);
  ASSERT_EQ(m.index.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    EXPECT_EQ(m.index.entries[i].path, idx.entries[i].path);
    EXPECT_EQ(m.assignment.split_of[i], s.split_of[i]);
  }
  EXPECT_THROW(parse_manifest("a/x.png\t0\tSOMETIMES\n", dir.path()), FormatError);
  EXPECT_THROW(parse_manifest("", dir.path()), FormatError);
}

TEST(Batches, ExactMultipleAndSingletons) {
  const SplitAssignment a = all_in(Split::kTest, 3632);
  const auto b = make_batches(a, Split::kTest, 16, 0, 1);
  EXPECT_EQ(b.size(), 227u);
  for (const auto& batch : b) EXPECT_EQ(batch.size(), 16u);
  EXPECT_EQ(b.front().front(), 0u);  // evaluation order is entry order

  const SplitAssignment small = all_in(Split::kVal, 9);
  const auto ones = make_batches(small, Split::kVal, 1, 0, 1);
  EXPECT_EQ(ones.size(), 9u);
  EXPECT_THROW(make_batches(small, Split::kTest, 4, 0, 1), UsageError);
}

TEST(Batches, TrainOrderIsSeededPermutationPerEpoch) {
  const SplitAssignment a = all_in(Split::kTrain, 50);
  const auto e0 = make_batches(a, Split::kTrain, 8, 0, 11);
  const auto e0b = make_batches(a, Split::kTrain, 8, 0, 11);
  const auto e1 = make_batches(a, Split::kTrain, 8, 1, 11);
  EXPECT_EQ(e0, e0b);
  EXPECT_NE(e0, e1);
  std::set<std::size_t> seen;
  for (const auto& batch : e1) seen.insert(batch.begin(), batch.end());
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(e0.back().size(), 2u);
}

TEST(Preset, RenumbersToPresetOrder) {
  TempDir dir("preset");
  const auto preset = find_preset("plantvillage-tomato");
  ASSERT_TRUE(preset.has_value());
  std::vector<std::pair<std::string, int>> classes;
  for (const auto& d : preset->directories) classes.push_back({d, 1});
  write_corpus(dir.path(), classes);
  const DatasetIndex idx = apply_preset(scan_dataset(dir.path()), *preset);
  for (const auto& e : idx.entries) {
    EXPECT_EQ(e.path.substr(0, e.path.find('/')), preset->directories[static_cast<std::size_t>(e.class_id)]);
  }
  EXPECT_FALSE(find_preset("nonexistent").has_value());
}

}  // namespace
}  // namespace leaflite
