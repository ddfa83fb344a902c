#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "strokewave/metrics.hpp"

namespace strokewave {

struct Sample {
  std::string path;
  std::size_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;

  std::array<std::size_t, kClassCount> class_counts() const noexcept;
  /// Throws InvalidArgument on an out-of-range label or a repeated path.
  void validate() const;
};

/// Expects root/{Hemorrhagic,Ischemic,Normal} (matched case-insensitively),
/// each holding *.png, *.jpg, *.jpeg or *.pgm files. Samples come back sorted
/// by path.
Dataset scan_dataset(const std::filesystem::path& root);

bool is_raster_file(const std::filesystem::path& p);

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;

  void validate() const;
};

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

/// Per class: seeded shuffle, floor(n * val) to val, floor(n * test) to test,
/// remainder to train. Each list is returned sorted by path.
Split split_stratified(const Dataset& d, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace strokewave
