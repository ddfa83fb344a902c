#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokewave/dwt.hpp"
#include "strokewave/image.hpp"
#include "strokewave/matrix.hpp"

namespace strokewave {

/// Width of every feature vector; matches the classifier's input layer.
inline constexpr std::size_t kFeatureDim = 128;

using FeatureVector = std::array<double, kFeatureDim>;

/// Reduction applied to one coefficient matrix.
struct Descriptor {
  enum class Kind { Pool, Stats };

  Kind kind = Kind::Stats;
  std::size_t rows = 0;   // Pool grid
  std::size_t cols = 0;   // Pool grid
  std::size_t stats = 0;  // Stats count, 1 or 4

  static Descriptor pool(std::size_t rows, std::size_t cols) {
    return {Kind::Pool, rows, cols, 0};
  }
  static Descriptor summary(std::size_t k) { return {Kind::Stats, 0, 0, k}; }

  std::size_t output_length() const noexcept { return kind == Kind::Pool ? rows * cols : stats; }
};

/// Which matrix a descriptor reads: the coarsest approximation, one detail
/// band, or the preprocessed source image itself.
struct FeatureSource {
  enum class Kind { Approximation, Detail, Global };

  Kind kind = Kind::Global;
  std::size_t level = 0;  // 1 = finest; only meaningful for Detail
  Orientation orientation = Orientation::LH;

  static FeatureSource approximation() { return {Kind::Approximation, 0, Orientation::LH}; }
  static FeatureSource detail(std::size_t level, Orientation o) { return {Kind::Detail, level, o}; }
  static FeatureSource global() { return {Kind::Global, 0, Orientation::LH}; }

  std::string label() const;
};

struct FeatureEntry {
  FeatureSource source;
  Descriptor descriptor;
};

struct FeatureConfig {
  std::string id;
  std::string wavelet;
  std::size_t levels = 0;
  std::vector<FeatureEntry> entries;

  std::size_t dimension() const noexcept;
  /// Throws InvalidArgument unless the entries sum to kFeatureDim, every
  /// descriptor is well formed, and no subband is referenced twice.
  void validate() const;
};

/// The two shipped allocations: ("haar", 2) and ("db4", 3).
FeatureConfig default_config(std::string_view wavelet, std::size_t levels);

/// Mean over a rows x cols grid of cells with boundaries at floor(i * m.rows / rows).
Matrix pool_mean(const Matrix& m, std::size_t rows, std::size_t cols, bool absolute);

/// k = 4: [log-energy, mean-abs, std, max-abs]; k = 1: [log-energy].
/// log-energy is ln(1e-12 + mean(v^2)); std is the population deviation.
std::vector<double> subband_stats(std::span<const double> values, std::size_t k);
inline std::vector<double> subband_stats(const Matrix& m, std::size_t k) {
  return subband_stats(std::span<const double>(m.values()), k);
}

/// Concatenates descriptor outputs in entry order. LL is pooled on raw values,
/// detail bands on magnitudes; Global statistics read the source image.
FeatureVector extract(const SubbandPyramid& p, const Image& img, const FeatureConfig& cfg);

/// Decomposes `img` with the config's wavelet and extracts features.
FeatureVector extract_features(const Image& img, const FeatureConfig& cfg);

/// Per-dimension z-score statistics fitted on training features.
struct Normalizer {
  static constexpr double kStdFloor = 1e-8;

  FeatureVector mean{};
  FeatureVector std{};

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

Normalizer identity_normalizer() noexcept;
Normalizer fit_normalizer(std::span<const FeatureVector> rows);
FeatureVector normalize(const FeatureVector& v, const Normalizer& n) noexcept;

}  // namespace strokewave
