#include <doctest.h>

#include <fstream>
#include <set>

#include "strokewave/dataset.hpp"
#include "strokewave/error.hpp"
#include "strokewave/image.hpp"
#include "support.hpp"

using namespace strokewave;
using strokewave::testing::TempDir;

namespace {

void make_tree(const std::filesystem::path& root, std::size_t per_class,
               std::initializer_list<const char*> dirs = {"Hemorrhagic", "Ischemic", "Normal"}) {
  const Image tiny(2, 2, 0.5);
  for (const char* d : dirs) {
    std::filesystem::create_directories(root / d);
    for (std::size_t i = 0; i < per_class; ++i)
      save_pgm(tiny, root / d / ("img_" + std::to_string(i) + ".pgm"));
  }
}

Dataset synthetic(std::size_t per_class) {
  Dataset d;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < per_class; ++i)
      d.samples.push_back({"c" + std::to_string(k) + "/" + std::to_string(1000 + i), k});
  return d;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("scan counts, labels and ordering") {
    TempDir dir("scan");
    make_tree(dir.path(), 10);
    { std::ofstream(dir / "Normal" / "notes.txt") << "ignored"; }
    const Dataset d = scan_dataset(dir.path());
    CHECK(d.samples.size() == 30);
    CHECK(d.class_counts() == std::array<std::size_t, 3>{10, 10, 10});
    CHECK(scan_dataset(dir.path()).samples == d.samples);
    CHECK(std::is_sorted(d.samples.begin(), d.samples.end(),
                         [](const Sample& a, const Sample& b) { return a.path < b.path; }));
  }

  TEST_CASE("class directories match case-insensitively") {
    TempDir dir("case");
    make_tree(dir.path(), 2, {"hemorrhagic", "ISCHEMIC", "Normal"});
    CHECK(scan_dataset(dir.path()).samples.size() == 6);
  }

  TEST_CASE("missing class is named in the error") {
    TempDir dir("missing");
    make_tree(dir.path(), 3, {"Hemorrhagic", "Normal"});
    CHECK_THROWS_WITH_AS(scan_dataset(dir.path()), doctest::Contains("Ischemic"), Error);
  }

  TEST_CASE("split sizes follow the floor rule") {
    const SplitRatios r;
    const Split a = split_stratified(synthetic(100), r, 1);
    CHECK(a.train.size() == 210);
    CHECK(a.val.size() == 45);
    CHECK(a.test.size() == 45);

    const Split b = split_stratified(synthetic(10), r, 1);
    CHECK(b.train.size() == 24);
    CHECK(b.val.size() == 3);
    CHECK(b.test.size() == 3);
    std::array<std::size_t, 3> val_per_class{};
    for (const auto& s : b.val) ++val_per_class[s.label];
    CHECK(val_per_class == std::array<std::size_t, 3>{1, 1, 1});
  }

  TEST_CASE("split is a seeded partition") {
    const Dataset d = synthetic(40);
    const Split a = split_stratified(d, SplitRatios{}, 7);
    const Split same = split_stratified(d, SplitRatios{}, 7);
    const Split other = split_stratified(d, SplitRatios{}, 8);
    CHECK(a.test == same.test);
    CHECK(a.val == same.val);
    CHECK(other.test.size() == a.test.size());
    CHECK(other.test != a.test);

    std::set<std::string> seen;
    for (const auto* part : {&a.train, &a.val, &a.test})
      for (const auto& s : *part) CHECK(seen.insert(s.path).second);
    CHECK(seen.size() == d.samples.size());
  }

  TEST_CASE("split preconditions") {
    CHECK_THROWS_AS(split_stratified(synthetic(2), SplitRatios{}, 1), InvalidArgument);
    CHECK_THROWS_AS(split_stratified(synthetic(10), SplitRatios{0.5, 0.3, 0.3}, 1),
                    InvalidArgument);
  }
}
