#include "strokewave/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>

#include "strokewave/error.hpp"
#include "strokewave/rng.hpp"

namespace strokewave {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool by_path(const Sample& a, const Sample& b) { return a.path < b.path; }

// Guards against 0.15 * 20 landing a hair under 3.
std::size_t floor_share(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

}  // namespace

std::array<std::size_t, kClassCount> Dataset::class_counts() const noexcept {
  std::array<std::size_t, kClassCount> counts{};
  for (const auto& s : samples) {
    if (s.label < kClassCount) ++counts[s.label];
  }
  return counts;
}

void Dataset::validate() const {
  std::set<std::string> paths;
  for (const auto& s : samples) {
    if (s.label >= kClassCount) throw InvalidArgument("label out of range for '" + s.path + "'");
    if (!paths.insert(s.path).second) throw InvalidArgument("duplicate sample path '" + s.path + "'");
  }
}

bool is_raster_file(const std::filesystem::path& p) {
  const std::string ext = lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm";
}

Dataset scan_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw IoError("dataset root '" + root.string() + "' is not a directory");
  }

  std::array<std::optional<fs::path>, kClassCount> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = lower(entry.path().filename().string());
    for (std::size_t k = 0; k < kClassCount; ++k) {
      if (name != kClassNames[k]) continue;
      if (class_dirs[k]) {
        throw IoError("dataset root '" + root.string() + "' has two directories for class '" +
                      std::string(kClassNames[k]) + "'");
      }
      class_dirs[k] = entry.path();
    }
  }

  Dataset d;
  for (std::size_t k = 0; k < kClassCount; ++k) {
    if (!class_dirs[k]) {
      throw IoError("dataset root '" + root.string() + "' is missing the '" +
                    std::string(kClassTitles[k]) + "' class directory");
    }
    std::size_t found = 0;
    for (const auto& entry : fs::directory_iterator(*class_dirs[k])) {
      if (!entry.is_regular_file() || !is_raster_file(entry.path())) continue;
      d.samples.push_back({entry.path().string(), k});
      ++found;
    }
    if (found == 0) {
      throw IoError("class directory '" + class_dirs[k]->string() + "' holds no images");
    }
  }
  std::sort(d.samples.begin(), d.samples.end(), by_path);
  return d;
}

void SplitRatios::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw InvalidArgument("split ratios must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must sum to 1");
  }
}

Split split_stratified(const Dataset& d, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  d.validate();

  std::array<std::vector<Sample>, kClassCount> by_class;
  for (const auto& s : d.samples) by_class[s.label].push_back(s);

  Split split;
  for (std::size_t k = 0; k < kClassCount; ++k) {
    auto& members = by_class[k];
    if (members.size() < 3) {
      throw InvalidArgument("class '" + std::string(kClassNames[k]) + "' has " +
                            std::to_string(members.size()) + " samples; at least 3 are needed");
    }
    std::sort(members.begin(), members.end(), by_path);
    RngStream rng(mix_seed(seed, k));
    for (std::size_t i = members.size() - 1; i > 0; --i) {
      std::swap(members[i], members[rng.below(i + 1)]);
    }
    const std::size_t n_val = floor_share(members.size(), ratios.val);
    const std::size_t n_test = floor_share(members.size(), ratios.test);
    auto it = members.begin();
    split.val.insert(split.val.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    split.test.insert(split.test.end(), it, it + static_cast<std::ptrdiff_t>(n_test));
    it += static_cast<std::ptrdiff_t>(n_test);
    split.train.insert(split.train.end(), it, members.end());
  }
  std::sort(split.train.begin(), split.train.end(), by_path);
  std::sort(split.val.begin(), split.val.end(), by_path);
  std::sort(split.test.begin(), split.test.end(), by_path);
  return split;
}

}  // namespace strokewave
