#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strokewave/dataset.hpp"
#include "strokewave/features.hpp"
#include "strokewave/image.hpp"
#include "strokewave/metrics.hpp"
#include "strokewave/mlp.hpp"

namespace strokewave {

struct PreprocessConfig {
  MaskConfig mask;
  bool apply_mask = true;
  std::size_t size = kCanonicalSize;
};

/// Resize to size x size, then mask annotations.
Image preprocess(const Image& raw, const PreprocessConfig& cfg);
/// load_image + preprocess; errors name the offending path.
Image load_preprocessed(const std::filesystem::path& path, const PreprocessConfig& cfg);

struct FeatureRow {
  std::string path;  // augmented copies carry a "#augK" suffix
  std::size_t label = 0;
  FeatureVector values{};
};

/// Everything that determines the extracted training features.
struct FeaturePipelineConfig {
  PreprocessConfig preprocess;
  AugmentConfig augment;
  std::size_t augment_copies = 3;
  std::string wavelet = "haar";
  std::size_t levels = 2;
  SplitRatios ratios;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;  // does not affect results

  /// Canonical text of every result-affecting field.
  std::string fingerprint() const;
  /// FNV-1a of the fingerprint, as 16 hex digits.
  std::string hash() const;
};

struct SplitFeatures {
  std::vector<FeatureRow> train;  // originals followed by their augmented copies
  std::vector<FeatureRow> val;
  std::vector<FeatureRow> test;
};

/// Unaugmented features for each sample, in input order.
std::vector<FeatureRow> extract_rows(std::span<const Sample> samples, const FeatureConfig& fcfg,
                                     const PreprocessConfig& pre, std::size_t jobs = 1);

/// Training samples contribute themselves plus augment_copies seeded copies;
/// validation and test samples are never augmented.
SplitFeatures build_split_features(const Split& split, const FeaturePipelineConfig& cfg);

/// Feature cache CSV: header `path,label,f0,...,f127`, one row per sample.
void write_feature_csv(std::span<const FeatureRow> rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

/// Writes all split rows to `path` plus a `<path>.meta.json` sidecar holding
/// the config hash.
void write_feature_cache(const SplitFeatures& f, const FeaturePipelineConfig& cfg,
                         const std::filesystem::path& path);
/// Returns the cached features when the sidecar hash matches cfg, otherwise nullopt.
/// The split is recomputed from the unaugmented rows with cfg.seed.
std::optional<SplitFeatures> load_feature_cache(const std::filesystem::path& path,
                                                const FeaturePipelineConfig& cfg);

struct TrainResult {
  MlpModel model;  // parameters of the best-validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on pre-extracted features. The normalizer is fitted on the
/// training rows; per-epoch train/val loss and accuracy use inference mode.
TrainResult train_on_features(const SplitFeatures& features, const FeatureConfig& fcfg,
                              const TrainConfig& tcfg, const EpochCallback& on_epoch = {});

/// Feature extraction followed by train_on_features.
TrainResult train(const Split& split, const FeaturePipelineConfig& cfg, const TrainConfig& tcfg,
                  const EpochCallback& on_epoch = {});

Metrics evaluate_rows(const MlpModel& model, std::span<const FeatureRow> rows);

/// Full preprocessing, extraction and prediction per sample, no augmentation.
Metrics evaluate(const MlpModel& model, std::span<const Sample> samples,
                 const PreprocessConfig& pre, std::size_t jobs = 1);

/// The feature config a model was trained with; throws if its id disagrees.
FeatureConfig feature_config_for(const MlpModel& model);

}  // namespace strokewave
